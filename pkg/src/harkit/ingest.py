"""Sensor-log ingestion: CSV parsing, clock alignment, prefiltering and
stretch normalization.

The stretch channel arrives as capacitance in pF (nominally 100 Hz, ~390 pF
neutral to ~500 pF fully stretched), the accelerometer as 3-axis values in g
(nominally 250 Hz). Both sensors stamp samples with their own clock; the
recorded clock origins give the skew between them. Preprocessing applies the
same 9-sample moving average to every channel, then maps the stretch signal
into dimensionless working units by subtracting the recording minimum and
dividing by a fixed scale constant.

CSV formats (UTF-8, LF):
    stretch: header ``t_ms,c_pf``
    accel:   header ``t_ms,ax,ay,az``
    labels:  header ``start_ms,end_ms,activity`` with activity codes
             D, J, L, S, Sd, W, T
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from .errors import InputError
from .labels import ActivityLabel

CAPACITANCE_BAND_PF = (300.0, 600.0)
STRETCH_SCALE = 8.0
FILTER_WINDOW = 9
DEFAULT_STRETCH_RATE_HZ = 100.0
DEFAULT_ACCEL_RATE_HZ = 250.0

STRETCH_HEADER = "t_ms,c_pf"
ACCEL_HEADER = "t_ms,ax,ay,az"
LABELS_HEADER = "start_ms,end_ms,activity"


@dataclass(frozen=True)
class LabelInterval:
    start_ms: int
    end_ms: int
    activity: ActivityLabel


@dataclass(frozen=True)
class RawRecording:
    """One recording as parsed from disk, before any processing.

    Timestamps are integer milliseconds on each sensor's own clock; the
    clock origins are the wall-clock readings taken at the shared start of
    the experiment, used later to remove the skew between the two sensors.
    """

    stretch_t: np.ndarray        # (n,) int64 ms
    stretch_pf: np.ndarray       # (n,) float64 capacitance
    accel_t: np.ndarray          # (m,) int64 ms
    accel_xyz: np.ndarray        # (m, 3) float64 g
    stretch_rate_hz: float = DEFAULT_STRETCH_RATE_HZ
    accel_rate_hz: float = DEFAULT_ACCEL_RATE_HZ
    stretch_clock_origin_ms: int = 0
    accel_clock_origin_ms: int = 0

    def __post_init__(self):
        if self.stretch_t.size == 0:
            raise InputError("empty channel: stretch")
        if self.accel_t.size == 0:
            raise InputError("empty channel: accel")
        for name, t in (("stretch", self.stretch_t), ("accel", self.accel_t)):
            if t.size > 1 and not np.all(np.diff(t) > 0):
                raise InputError(f"non-monotone timestamps in {name} channel")
        lo, hi = CAPACITANCE_BAND_PF
        bad = (self.stretch_pf < lo) | (self.stretch_pf > hi)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise InputError(
                f"capacitance {self.stretch_pf[k]:.1f} pF at t={int(self.stretch_t[k])} ms "
                f"outside plausible band [{lo:.0f}, {hi:.0f}]"
            )


@dataclass(frozen=True)
class SensorStream:
    """Clock-aligned, filtered, normalized recording on one shared time base."""

    stretch_t: np.ndarray        # (n,) int64 ms
    stretch: np.ndarray          # (n,) float64, min exactly 0 over the recording
    accel_t: np.ndarray          # (m,) int64 ms
    accel_xyz: np.ndarray        # (m, 3) float64 g
    labels: tuple[LabelInterval, ...] | None = None
    stretch_rate_hz: float = DEFAULT_STRETCH_RATE_HZ
    accel_rate_hz: float = DEFAULT_ACCEL_RATE_HZ

    @property
    def duration_ms(self) -> int:
        return int(self.stretch_t[-1] - self.stretch_t[0])


def _open_text(source: str | Path | IO) -> IO:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)) or (
        hasattr(source, "read") and isinstance(source.read(0), bytes)
    ):
        return io.TextIOWrapper(source, encoding="utf-8")
    return source


def _parse_rows(source, header: str, n_fields: int, what: str):
    fh = _open_text(source)
    own_handle = isinstance(source, (str, Path))
    try:
        first = fh.readline().strip()
        if first != header:
            raise InputError(f"{what}: expected header {header!r}, got {first!r}")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != n_fields:
                raise InputError(f"{what}: malformed row at line {lineno}: {line!r}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise InputError(f"{what}: malformed row at line {lineno}: {line!r}") from None
        return rows
    finally:
        if own_handle:
            fh.close()


def _parse_labels(source) -> tuple[LabelInterval, ...]:
    fh = _open_text(source)
    own_handle = isinstance(source, (str, Path))
    intervals = []
    try:
        first = fh.readline().strip()
        if first != LABELS_HEADER:
            raise InputError(f"labels: expected header {LABELS_HEADER!r}, got {first!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise InputError(f"labels: malformed row at line {lineno}: {line!r}")
            try:
                start, end = int(parts[0]), int(parts[1])
                activity = ActivityLabel.from_code(parts[2])
            except ValueError as exc:
                raise InputError(f"labels: malformed row at line {lineno}: {exc}") from None
            if end <= start:
                raise InputError(f"labels: empty or inverted interval at line {lineno}")
            intervals.append(LabelInterval(start, end, activity))
    finally:
        if own_handle:
            fh.close()
    intervals.sort(key=lambda iv: iv.start_ms)
    for a, b in zip(intervals, intervals[1:]):
        if b.start_ms < a.end_ms:
            raise InputError(
                f"labels: overlapping intervals [{a.start_ms},{a.end_ms}) and "
                f"[{b.start_ms},{b.end_ms})"
            )
    return tuple(intervals)


def parse_recording(
    stretch_file,
    accel_file,
    labels_file=None,
    *,
    stretch_clock_origin_ms: int | None = None,
    accel_clock_origin_ms: int | None = None,
    stretch_rate_hz: float = DEFAULT_STRETCH_RATE_HZ,
    accel_rate_hz: float = DEFAULT_ACCEL_RATE_HZ,
) -> tuple[RawRecording, tuple[LabelInterval, ...] | None]:
    """Parse the stretch/accel CSV pair (and optional label track).

    Clock origins default to each channel's first timestamp, which encodes
    the assumption that both sensors started sampling at the same physical
    instant; pass explicit origins when the recording metadata says
    otherwise.
    """
    s_rows = _parse_rows(stretch_file, STRETCH_HEADER, 2, "stretch")
    a_rows = _parse_rows(accel_file, ACCEL_HEADER, 4, "accel")
    if not s_rows:
        raise InputError("empty channel: stretch")
    if not a_rows:
        raise InputError("empty channel: accel")

    s = np.array(s_rows, dtype=float)
    a = np.array(a_rows, dtype=float)
    stretch_t = s[:, 0].astype(np.int64)
    accel_t = a[:, 0].astype(np.int64)
    raw = RawRecording(
        stretch_t=stretch_t,
        stretch_pf=s[:, 1],
        accel_t=accel_t,
        accel_xyz=a[:, 1:4],
        stretch_rate_hz=stretch_rate_hz,
        accel_rate_hz=accel_rate_hz,
        stretch_clock_origin_ms=(
            int(stretch_t[0]) if stretch_clock_origin_ms is None else int(stretch_clock_origin_ms)
        ),
        accel_clock_origin_ms=(
            int(accel_t[0]) if accel_clock_origin_ms is None else int(accel_clock_origin_ms)
        ),
    )
    labels = _parse_labels(labels_file) if labels_file is not None else None
    return raw, labels


def write_recording_csv(
    raw: RawRecording,
    stretch_path: str | Path,
    accel_path: str | Path,
    labels: Iterable[LabelInterval] | None = None,
    labels_path: str | Path | None = None,
) -> None:
    """Serialize a recording back to the on-disk CSV formats."""
    with open(stretch_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(STRETCH_HEADER + "\n")
        for t, c in zip(raw.stretch_t, raw.stretch_pf):
            fh.write(f"{int(t)},{float(c)!r}\n")
    with open(accel_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(ACCEL_HEADER + "\n")
        for t, (x, y, z) in zip(raw.accel_t, raw.accel_xyz):
            fh.write(f"{int(t)},{float(x)!r},{float(y)!r},{float(z)!r}\n")
    if labels is not None and labels_path is not None:
        with open(labels_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(LABELS_HEADER + "\n")
            for iv in labels:
                fh.write(f"{iv.start_ms},{iv.end_ms},{iv.activity.code}\n")


def align_clocks(raw: RawRecording) -> RawRecording:
    """Put the accelerometer on the stretch sensor's time base.

    The accel clock reads ``accel_origin`` at the same physical instant the
    stretch clock reads ``stretch_origin``, so every accel timestamp is
    shifted by (stretch_origin - accel_origin). The offset may be negative;
    stretch timestamps are left untouched.
    """
    offset = raw.stretch_clock_origin_ms - raw.accel_clock_origin_ms
    if offset == 0:
        return raw
    return replace(
        raw,
        accel_t=raw.accel_t + offset,
        accel_clock_origin_ms=raw.accel_clock_origin_ms + offset,
    )


def moving_average(samples, window: int = FILTER_WINDOW) -> np.ndarray:
    """Centered moving average with symmetric truncation at the stream edges.

    Element k averages the window centered at k; near the edges the window
    shrinks symmetrically (no zero padding) so constants pass through
    unchanged and no artificial boundary dips are introduced.
    """
    if window < 1 or window % 2 == 0:
        raise InputError(f"moving average window must be odd and >= 1, got {window}")
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n == 0 or window == 1:
        return x.copy()
    half = window // 2
    k = np.arange(n)
    h = np.minimum(half, np.minimum(k, n - 1 - k))
    csum = np.concatenate(([0.0], np.cumsum(x)))
    lo = k - h
    hi = k + h
    return (csum[hi + 1] - csum[lo]) / (hi - lo + 1)


def normalize_stretch(filtered, s_const: float = STRETCH_SCALE) -> np.ndarray:
    """Map capacitance to working units: (value - recording minimum) / s_const."""
    x = np.asarray(filtered, dtype=float)
    if x.size == 0:
        raise InputError("cannot normalize an empty stretch stream")
    return (x - x.min()) / s_const


class StreamingNormalizer:
    """Running-minimum variant of the stretch normalization for live streams.

    The recording-wide minimum is unavailable mid-stream, so the baseline is
    the minimum seen so far, with the first ``calibration_ms`` treated as a
    calibration window (the wearer is assumed near-neutral at start). Output
    is always >= 0 and matches the batch normalization exactly once the
    recording's global minimum has been observed.
    """

    def __init__(self, s_const: float = STRETCH_SCALE, calibration_ms: int = 2000):
        self.s_const = s_const
        self.calibration_ms = calibration_ms
        self._t0: int | None = None
        self._t_last: int | None = None
        self._running_min = np.inf

    @property
    def calibrated(self) -> bool:
        """True once the calibration window has fully elapsed."""
        return (
            self._t0 is not None
            and self._t_last is not None
            and self._t_last - self._t0 >= self.calibration_ms
        )

    def feed(self, t_ms: int, value_pf: float) -> float:
        if self._t0 is None:
            self._t0 = t_ms
        self._t_last = t_ms
        if value_pf < self._running_min:
            self._running_min = value_pf
        return (value_pf - self._running_min) / self.s_const


def preprocess(
    raw: RawRecording,
    labels: tuple[LabelInterval, ...] | None = None,
    *,
    window: int = FILTER_WINDOW,
    s_const: float = STRETCH_SCALE,
) -> SensorStream:
    """Full ingest chain: align clocks, moving-average every channel,
    normalize the stretch signal."""
    aligned = align_clocks(raw)
    stretch = normalize_stretch(moving_average(aligned.stretch_pf, window), s_const)
    accel = np.column_stack(
        [moving_average(aligned.accel_xyz[:, i], window) for i in range(3)]
    )
    return SensorStream(
        stretch_t=aligned.stretch_t.copy(),
        stretch=stretch,
        accel_t=aligned.accel_t.copy(),
        accel_xyz=accel,
        labels=labels,
        stretch_rate_hz=raw.stretch_rate_hz,
        accel_rate_hz=raw.accel_rate_hz,
    )
