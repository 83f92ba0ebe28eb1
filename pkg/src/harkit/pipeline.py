"""End-to-end driver: chain ingest, segmentation, feature extraction and
classification over one recording, with optional online adaptation.

Stage failures carry the stage name so a corrupt input is attributed to the
step that choked on it.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np

from .errors import HarError, InputError
from .evaluate import majority_label
from .features import FeaturePipeline
from .ingest import SensorStream, parse_recording, preprocess
from .labels import ActivityLabel
from .model import NetworkParams, forward
from .online import LearnerConfig, RewardEvent, update_weights
from .segment import Segment, segment_stream


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except HarError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


@dataclass(frozen=True)
class RecognizedActivity:
    """The payload a deployed device would transmit: just the activity and
    its window."""

    activity: ActivityLabel
    start_ms: int
    end_ms: int


@dataclass(frozen=True)
class PipelineResult:
    recognized: tuple[RecognizedActivity, ...]
    segments: tuple[Segment, ...]
    params: NetworkParams           # updated in rl mode, untouched otherwise
    session_accuracy: float | None  # vs. majority-overlap labels, rl mode only


def build_labeled_dataset(
    stream: SensorStream,
    *,
    drop_unlabeled: bool = True,
) -> tuple[list[tuple[np.ndarray, ActivityLabel]], list[Segment]]:
    """Segment a labeled stream and produce (features, label) training pairs.

    The previous-activity feature is teacher-forced with the ground-truth
    label of the preceding segment. Segments with no majority label (more
    than half outside any label interval) are dropped or rejected.
    """
    if stream.labels is None:
        raise InputError("stream carries no label track")
    with _stage("segment"):
        segments = segment_stream(stream)
    dataset: list[tuple[np.ndarray, ActivityLabel]] = []
    kept: list[Segment] = []
    with _stage("features"):
        context = FeaturePipeline()
        for seg in segments:
            x = context.process(seg)
            label = majority_label(stream.labels, seg.start_ms, seg.end_ms)
            if label is None:
                if not drop_unlabeled:
                    raise InputError(
                        f"segment [{seg.start_ms}, {seg.end_ms}) has no majority label"
                    )
                context.note_activity(None)
                continue
            context.note_activity(label)
            dataset.append((x, label))
            kept.append(seg)
    return dataset, kept


def run_stream(
    stream: SensorStream,
    params: NetworkParams,
    mode: str = "infer",
    learner: LearnerConfig = LearnerConfig(),
) -> PipelineResult:
    """Run segmentation + classification over a preprocessed stream.

    infer mode never modifies the params. rl mode requires a label track:
    each classification is rewarded +1/-1 against the majority-overlap label
    and the output layer is updated after every segment.
    """
    if mode not in ("infer", "rl"):
        raise InputError(f"unknown pipeline mode {mode!r}")
    if mode == "rl" and stream.labels is None:
        raise InputError("rl mode requires a label track")

    with _stage("segment"):
        segments = segment_stream(stream)

    recognized: list[RecognizedActivity] = []
    context = FeaturePipeline()
    correct = 0
    judged = 0
    for seg in segments:
        with _stage("features"):
            x = context.process(seg)
        with _stage("classify"):
            policy = forward(params, x)
            action = ActivityLabel(int(np.argmax(policy.probs)) + 1)
        recognized.append(RecognizedActivity(action, seg.start_ms, seg.end_ms))
        context.note_activity(action)
        if mode == "rl":
            truth = majority_label(stream.labels, seg.start_ms, seg.end_ms)
            if truth is not None:
                judged += 1
                hit = action == truth
                correct += hit
                with _stage("online"):
                    params = update_weights(
                        params, RewardEvent(1 if hit else -1, action, policy), learner.alpha
                    )
    accuracy = (correct / judged) if (mode == "rl" and judged) else None
    return PipelineResult(
        recognized=tuple(recognized),
        segments=tuple(segments),
        params=params,
        session_accuracy=accuracy,
    )


def run_pipeline(
    stretch_path,
    accel_path,
    labels_path=None,
    *,
    params: NetworkParams,
    mode: str = "infer",
    learner: LearnerConfig = LearnerConfig(),
) -> PipelineResult:
    """File-level entry point: parse the CSV trio, preprocess, then run."""
    with _stage("ingest"):
        raw, labels = parse_recording(stretch_path, accel_path, labels_path)
        stream = preprocess(raw, labels=labels)
    return run_stream(stream, params, mode=mode, learner=learner)
