"""Motion-driven non-uniform segmentation of the normalized stretch stream.

Activity boundaries show up as the stretch signal rising out of a local
minimum or a flat stretch: the segmenter tracks the 5-point derivative of
the signal, confirms a trend only after three consecutive derivatives agree,
and cuts a new window whenever the confirmed trend turns from flat or
decreasing to increasing. Window duration is bounded to [1 s, 3 s]: rises
inside the 1 s lockout are ignored, and a boundary is forced once 3 s pass
without one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .ingest import SensorStream

MIN_SEGMENT_MS = 1000
MAX_SEGMENT_MS = 3000
CONFIRM_RUN = 3
FLAT_EPS = 0.01  # dead zone in normalized units per sample; |s'| below is flat


class TrendState(enum.Enum):
    INCREASING = 1
    DECREASING = -1
    FLAT = 0


class BoundaryCause(str, enum.Enum):
    TREND_RISE = "TrendRise"
    MAX_DURATION = "MaxDuration"
    STREAM_END = "StreamEnd"


def derivative5(window) -> float:
    """Five-point derivative at the center of a 5-sample window,
    [s(t-2) - 8 s(t-1) + 8 s(t+1) - s(t+2)] / 12, in units per sample step.

    Exact for polynomials up to degree 4; needs two samples of lookahead,
    so the stream head and tail each lose two output samples.
    """
    w = np.asarray(window, dtype=float)
    if w.shape != (5,):
        raise InputError(f"derivative5 needs exactly 5 samples, got shape {w.shape}")
    return float((w[0] - 8.0 * w[1] + 8.0 * w[3] - w[4]) / 12.0)


def derivative5_series(x) -> np.ndarray:
    """Vectorized 5-point derivative; output k corresponds to input k+2."""
    s = np.asarray(x, dtype=float)
    if s.size < 5:
        return np.empty(0)
    return (s[:-4] - 8.0 * s[1:-3] + 8.0 * s[3:-1] - s[4:]) / 12.0


def classify_sign(derivative: float, eps: float = FLAT_EPS) -> TrendState:
    if derivative >= eps:
        return TrendState.INCREASING
    if derivative <= -eps:
        return TrendState.DECREASING
    return TrendState.FLAT


@dataclass
class Trend:
    """Trend confirmation state: the current confirmed trend plus evidence
    accumulated for a candidate new trend. The confirmed state changes only
    after CONFIRM_RUN consecutive derivatives signal the same new trend."""

    state: TrendState = TrendState.FLAT
    candidate: TrendState | None = None
    evidence: int = 0

    def reset(self, state: TrendState = TrendState.FLAT) -> None:
        self.state = state
        self.candidate = None
        self.evidence = 0

    def update(self, sign: TrendState) -> tuple[TrendState, TrendState] | None:
        """Feed one derivative sign; returns (old, new) when the confirmed
        trend changes, else None."""
        if sign == self.state:
            self.candidate = None
            self.evidence = 0
            return None
        if sign == self.candidate:
            self.evidence += 1
        else:
            self.candidate = sign
            self.evidence = 1
        if self.evidence >= CONFIRM_RUN:
            old = self.state
            self.state = sign
            self.candidate = None
            self.evidence = 0
            return (old, self.state)
        return None


@dataclass(frozen=True)
class Boundary:
    t_ms: int
    cause: BoundaryCause


@dataclass(frozen=True)
class Segment:
    """One activity window; consecutive segments tile the stream."""

    start_ms: int
    end_ms: int
    stretch: np.ndarray          # native-rate normalized stretch in [start, end)
    accel: np.ndarray            # (n, 3) native-rate acceleration in [start, end)
    cause: BoundaryCause         # cause of the boundary that closed this segment
    degenerate: bool = False     # stream shorter than the minimum duration

    @property
    def duration_s(self) -> float:
        return (self.end_ms - self.start_ms) / 1000.0


def detect_boundaries(
    t_ms,
    stretch,
    *,
    eps: float = FLAT_EPS,
    min_ms: int = MIN_SEGMENT_MS,
    max_ms: int = MAX_SEGMENT_MS,
) -> list[Boundary]:
    """Run the trend machine over one stream and return its cut points.

    A TrendRise boundary is emitted when the confirmed trend transitions
    flat->increasing or decreasing->increasing and at least ``min_ms`` has
    passed since the previous boundary (measured boundary-timestamp to
    boundary-timestamp); a MaxDuration boundary is forced at the first
    sample ``max_ms`` or later after the previous one. Boundaries carry the
    center-sample timestamp of the derivative that confirmed them, not the
    (2 samples later) decision time. Forced cuts reset the trend machine to
    flat with zero evidence.
    """
    t = np.asarray(t_ms, dtype=np.int64)
    derivs = derivative5_series(stretch)
    boundaries: list[Boundary] = []
    if t.size == 0:
        return boundaries
    seg_start = int(t[0])
    trend = Trend()
    for k in range(derivs.size):
        now = int(t[k + 2])
        if now - seg_start >= max_ms:
            boundaries.append(Boundary(now, BoundaryCause.MAX_DURATION))
            seg_start = now
            trend.reset()
            continue
        transition = trend.update(classify_sign(derivs[k], eps))
        if transition is None:
            continue
        old, new = transition
        if new is TrendState.INCREASING and old in (TrendState.FLAT, TrendState.DECREASING):
            if now - seg_start >= min_ms:
                boundaries.append(Boundary(now, BoundaryCause.TREND_RISE))
                seg_start = now
    return boundaries


def segment_stream(
    stream: SensorStream,
    *,
    eps: float = FLAT_EPS,
    min_ms: int = MIN_SEGMENT_MS,
    max_ms: int = MAX_SEGMENT_MS,
) -> list[Segment]:
    """Cut the stream into segments carrying their native-rate samples.

    Segments tile the stream exactly: each covers [start_ms, end_ms) with
    next.start == previous.end, and the last one (cause StreamEnd) runs to
    one sample period past the final stretch sample so that every sample
    belongs to exactly one segment. A stream shorter than the minimum
    duration yields a single segment flagged degenerate.
    """
    boundaries = detect_boundaries(stream.stretch_t, stream.stretch, eps=eps, min_ms=min_ms, max_ms=max_ms)
    period_ms = int(round(1000.0 / stream.stretch_rate_hz))
    start = int(stream.stretch_t[0])
    end = int(stream.stretch_t[-1]) + period_ms
    cuts = [start] + [b.t_ms for b in boundaries] + [end]
    causes = [b.cause for b in boundaries] + [BoundaryCause.STREAM_END]
    degenerate = end - start < min_ms

    segments: list[Segment] = []
    for (s, e), cause in zip(zip(cuts, cuts[1:]), causes):
        s_mask = (stream.stretch_t >= s) & (stream.stretch_t < e)
        a_mask = (stream.accel_t >= s) & (stream.accel_t < e)
        segments.append(
            Segment(
                start_ms=s,
                end_ms=e,
                stretch=stream.stretch[s_mask].copy(),
                accel=stream.accel_xyz[a_mask].copy(),
                cause=cause,
                degenerate=degenerate,
            )
        )
    return segments
