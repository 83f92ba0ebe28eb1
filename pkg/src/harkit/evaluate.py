"""Classification metrics: the 7x7 confusion matrix and the majority-overlap
rule that assigns a ground-truth label to a segment."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .labels import ALL_LABELS, ActivityLabel, N_ACTIVITIES
from .ingest import LabelInterval
from .model import NetworkParams, classify


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are truth, columns are prediction, both ordered D,J,L,S,Sd,W,T."""

    counts: np.ndarray  # (7, 7) int64

    def __post_init__(self):
        if self.counts.shape != (N_ACTIVITIES, N_ACTIVITIES):
            raise InputError(f"confusion matrix must be {N_ACTIVITIES}x{N_ACTIVITIES}")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def overall_accuracy(self) -> float:
        total = self.total
        return float(np.trace(self.counts) / total) if total else float("nan")

    @property
    def per_class_recall(self) -> np.ndarray:
        """Diagonal over row sum; nan for classes absent from the truth."""
        rows = self.row_sums.astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, np.diag(self.counts) / rows, np.nan)

    def recall(self, label: ActivityLabel) -> float:
        return float(self.per_class_recall[label.value - 1])


def confusion_from_pairs(pairs) -> ConfusionMatrix:
    """Tally (truth, prediction) label pairs."""
    counts = np.zeros((N_ACTIVITIES, N_ACTIVITIES), dtype=np.int64)
    for truth, pred in pairs:
        if truth is None:
            raise InputError("unlabeled segment in evaluation input")
        counts[truth.value - 1, pred.value - 1] += 1
    return ConfusionMatrix(counts)


def evaluate(params: NetworkParams, labeled_features) -> ConfusionMatrix:
    """Classify every feature vector and tally against its label."""
    pairs = []
    for x, truth in labeled_features:
        if truth is None:
            raise InputError("unlabeled segment in evaluation input")
        pairs.append((truth, classify(params, x)))
    return confusion_from_pairs(pairs)


def majority_label(
    labels: tuple[LabelInterval, ...],
    start_ms: int,
    end_ms: int,
) -> ActivityLabel | None:
    """The label covering more than half of [start_ms, end_ms), if any."""
    if end_ms <= start_ms:
        raise InputError("empty segment interval")
    best: ActivityLabel | None = None
    best_cover = 0
    for iv in labels:
        cover = min(end_ms, iv.end_ms) - max(start_ms, iv.start_ms)
        if cover > best_cover:
            best_cover = cover
            best = iv.activity
    if best is not None and 2 * best_cover > (end_ms - start_ms):
        return best
    return None


def write_confusion_csv(cm: ConfusionMatrix, path: str | Path) -> None:
    codes = [label.code for label in ALL_LABELS]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("true," + ",".join(codes) + "\n")
        for label, row in zip(ALL_LABELS, cm.counts):
            fh.write(label.code + "," + ",".join(str(int(v)) for v in row) + "\n")
