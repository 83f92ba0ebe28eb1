"""Figure rendering for the CLI report paths.

Every figure goes to a file next to the delimited output; nothing here ever
opens a window (Agg backend).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import ConfusionMatrix
from .ingest import SensorStream
from .labels import ALL_LABELS
from .model import SweepPoint
from .online import EpisodeLog


def save_confusion_figure(cm: ConfusionMatrix, path: str | Path) -> None:
    codes = [label.code for label in ALL_LABELS]
    rows = cm.row_sums.astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        pct = np.where(rows[:, None] > 0, 100.0 * cm.counts / rows[:, None], 0.0)
    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    im = ax.imshow(pct, cmap="Blues", vmin=0, vmax=100)
    ax.set_xticks(range(len(codes)), codes)
    ax.set_yticks(range(len(codes)), codes)
    ax.set_xlabel("Predicted")
    ax.set_ylabel("True")
    for i in range(len(codes)):
        for j in range(len(codes)):
            if cm.counts[i, j]:
                color = "white" if pct[i, j] > 60 else "black"
                ax.text(j, i, f"{pct[i, j]:.1f}", ha="center", va="center",
                        color=color, fontsize=8)
    ax.set_title(f"Overall accuracy {100.0 * cm.overall_accuracy:.1f}%")
    fig.colorbar(im, ax=ax, label="% of true class")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(points: list[SweepPoint], path: str | Path) -> None:
    n_h = [p.n_hidden for p in points]
    acc = [100.0 * p.overall_accuracy for p in points]
    kb = [p.weight_bytes / 1024.0 for p in points]
    fig, ax = plt.subplots(figsize=(5.4, 3.6))
    ax.plot(n_h, acc, "o-", color="tab:blue", label="Overall accuracy")
    ax.set_xlabel("Hidden-layer neurons")
    ax.set_ylabel("Accuracy (%)", color="tab:blue")
    ax.tick_params(axis="y", labelcolor="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(n_h, kb, "s--", color="tab:red", label="Stored weights")
    ax2.set_ylabel("Weight memory (kB)", color="tab:red")
    ax2.tick_params(axis="y", labelcolor="tab:red")
    ax.set_xticks(n_h)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_episode_figure(logs: dict[str, EpisodeLog], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5.8, 3.8))
    for name, log in logs.items():
        episodes = np.arange(1, log.traces.shape[1] + 1)
        ax.plot(episodes, 100.0 * log.mean_trace, label=f"{name} (init {100 * log.initial_accuracy:.0f}%)")
    ax.set_xlabel("Episode")
    ax.set_ylabel("Accuracy (%)")
    ax.set_ylim(0, 102)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_stream_figure(stream: SensorStream, path: str | Path, max_seconds: float = 60.0) -> None:
    s_mask = stream.stretch_t <= stream.stretch_t[0] + 1000 * max_seconds
    a_mask = stream.accel_t <= stream.accel_t[0] + 1000 * max_seconds
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7.5, 4.6), sharex=True)
    ax1.plot(stream.stretch_t[s_mask] / 1000.0, stream.stretch[s_mask], lw=0.8, color="tab:green")
    ax1.set_ylabel("Stretch (norm.)")
    for i, name in enumerate(("ax", "ay", "az")):
        ax2.plot(stream.accel_t[a_mask] / 1000.0, stream.accel_xyz[a_mask, i], lw=0.6, label=name)
    ax2.set_ylabel("Accel (g)")
    ax2.set_xlabel("Time (s)")
    ax2.legend(fontsize=8, ncol=3)
    if stream.labels:
        for iv in stream.labels:
            if iv.start_ms / 1000.0 > max_seconds:
                break
            ax1.axvline(iv.start_ms / 1000.0, color="gray", lw=0.5, alpha=0.6)
            ax1.text(iv.start_ms / 1000.0, ax1.get_ylim()[1], iv.activity.code,
                     fontsize=7, va="top")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
