"""Feature extraction: fixed-size window standardization, stretch FFT,
accelerometer Haar DWT, and assembly of the 117-value classifier input.

Each segment is standardized to 32 stretch points and 64 accelerometer
points (power-of-two sizes keep the transforms cheap), then reduced to:

    index   feature
    0-15    magnitudes of FFT bins 0..15 of the previous and current
            stretch windows concatenated (64-point transform)
    16      stretch minimum over the native-rate segment
    17      stretch maximum over the native-rate segment
    18-49   level-1 Haar approximation of ax (32 values)
    50-81   level-1 Haar approximation of az (32 values)
    82-113  level-1 Haar approximation of gravity-removed |a| (32 values)
    114     mean of ay over the native-rate segment
    115     segment length in seconds
    116     previous-window activity, encoded index / 7

for a total of 117 features in this fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .labels import ActivityLabel, encode_previous
from .segment import Segment

FEATURE_DIM = 117
STRETCH_POINTS = 32
ACCEL_POINTS = 64
FFT_BINS = 16
GRAVITY_G = 1.0

FFT_SLICE = slice(0, 16)
STRETCH_MIN_INDEX = 16
STRETCH_MAX_INDEX = 17
DWT_AX_SLICE = slice(18, 50)
DWT_AZ_SLICE = slice(50, 82)
DWT_BACC_SLICE = slice(82, 114)
AY_MEAN_INDEX = 114
SEG_LEN_INDEX = 115
PREV_ACTIVITY_INDEX = 116


def subsample_smooth(samples, target: int) -> np.ndarray:
    """Standardize a native-rate window to ``target`` points.

    With N >= target, output k is the mean of the samples in a window of
    half-width S_R = floor(N / target) centered at k * S_R, with indices
    clamped to the valid range at the edges. With N < target the input is
    copied and the tail zero-padded.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    out = np.zeros(target, dtype=float)
    if n == 0:
        return out
    if n < target:
        out[:n] = x
        return out
    sr = n // target
    centers = np.arange(target) * sr
    offsets = np.arange(-sr, sr + 1)
    idx = np.clip(centers[:, None] + offsets[None, :], 0, n - 1)
    return x[idx].mean(axis=1)


def _fft_pow2(x) -> np.ndarray:
    """Iterative radix-2 decimation-in-time FFT for power-of-two sizes."""
    a = np.asarray(x, dtype=complex).copy()
    n = a.size
    if n == 0 or n & (n - 1):
        raise InputError(f"FFT size must be a power of two, got {n}")
    # bit-reversal permutation
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            a[i], a[j] = a[j], a[i]
    m = 2
    while m <= n:
        half = m // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / m)
        blocks = a.reshape(n // m, m)
        odd = blocks[:, half:] * twiddle
        blocks[:, half:] = blocks[:, :half] - odd
        blocks[:, :half] += odd
        m *= 2
    return a


def fft_stretch(current, previous) -> np.ndarray:
    """Magnitudes of the leading 16 FFT bins of previous||current.

    Both windows are standardized 32-point stretch arrays; the transform
    runs over the two windows concatenated in time order so repeating
    patterns that span a window boundary still register. For the first
    segment of a stream pass a zero window as ``previous``.
    """
    cur = np.asarray(current, dtype=float)
    prev = np.asarray(previous, dtype=float)
    if cur.shape != (STRETCH_POINTS,) or prev.shape != (STRETCH_POINTS,):
        raise InputError(
            f"fft_stretch expects two {STRETCH_POINTS}-point windows, "
            f"got {cur.shape} and {prev.shape}"
        )
    spectrum = _fft_pow2(np.concatenate([prev, cur]))
    return np.abs(spectrum[:FFT_BINS])


def body_accel(ax, ay, az) -> np.ndarray | float:
    """Gravity-removed body acceleration sqrt(ax^2+ay^2+az^2) - g, in g units.

    Negative during free-fall-like motion; exactly 0 at rest with any
    orientation, which is what makes it orientation-independent.
    """
    return np.sqrt(np.square(ax) + np.square(ay) + np.square(az)) - GRAVITY_G


def dwt_level1(x) -> np.ndarray:
    """Level-1 orthonormal Haar approximation: A1[k] = (x[2k] + x[2k+1]) / sqrt(2)."""
    a = np.asarray(x, dtype=float)
    if a.shape != (ACCEL_POINTS,):
        raise InputError(f"dwt_level1 expects length {ACCEL_POINTS}, got {a.shape}")
    return (a[0::2] + a[1::2]) / np.sqrt(2.0)


@dataclass(frozen=True)
class StandardizedSegment:
    """Fixed-size view of one segment plus the native-rate scalars that
    survive standardization (extrema and lateral mean are taken before
    subsampling so zero padding cannot distort them)."""

    stretch32: np.ndarray        # (32,)
    accel64: np.ndarray          # (64, 4) columns ax, ay, az, b_acc
    n_native_stretch: int
    n_native_accel: int
    stretch_min: float
    stretch_max: float
    ay_mean: float


def standardize_segment(seg: Segment) -> StandardizedSegment:
    stretch32 = subsample_smooth(seg.stretch, STRETCH_POINTS)
    if seg.accel.size:
        b = body_accel(seg.accel[:, 0], seg.accel[:, 1], seg.accel[:, 2])
        channels = [seg.accel[:, 0], seg.accel[:, 1], seg.accel[:, 2], b]
        ay_mean = float(seg.accel[:, 1].mean())
    else:
        channels = [np.empty(0)] * 4
        ay_mean = 0.0
    accel64 = np.column_stack([subsample_smooth(c, ACCEL_POINTS) for c in channels])
    if seg.stretch.size:
        s_min, s_max = float(seg.stretch.min()), float(seg.stretch.max())
    else:
        s_min = s_max = 0.0
    return StandardizedSegment(
        stretch32=stretch32,
        accel64=accel64,
        n_native_stretch=int(seg.stretch.size),
        n_native_accel=int(seg.accel.shape[0]) if seg.accel.size else 0,
        stretch_min=s_min,
        stretch_max=s_max,
        ay_mean=ay_mean,
    )


def assemble_features(
    std: StandardizedSegment,
    prev_fft_window,
    seg_len_s: float,
    prev_activity: ActivityLabel | None,
) -> np.ndarray:
    """Build the 117-value feature vector in the fixed order above."""
    x = np.concatenate(
        [
            fft_stretch(std.stretch32, prev_fft_window),
            [std.stretch_min, std.stretch_max],
            dwt_level1(std.accel64[:, 0]),
            dwt_level1(std.accel64[:, 2]),
            dwt_level1(std.accel64[:, 3]),
            [std.ay_mean, seg_len_s, encode_previous(prev_activity)],
        ]
    )
    if x.size != FEATURE_DIM:
        raise InputError(f"feature vector has {x.size} values, expected {FEATURE_DIM}")
    return x


class FeaturePipeline:
    """Per-stream feature context: remembers the previous stretch window for
    the two-window FFT and the previous activity label.

    The caller decides what the previous activity is: ground truth when
    building training data, the classifier's own output when running closed
    loop. Call :meth:`note_activity` after each segment to roll the context.
    """

    def __init__(self):
        self._prev_window = np.zeros(STRETCH_POINTS)
        self._prev_activity: ActivityLabel | None = None

    @property
    def prev_activity(self) -> ActivityLabel | None:
        return self._prev_activity

    def process(self, seg: Segment) -> np.ndarray:
        std = standardize_segment(seg)
        x = assemble_features(std, self._prev_window, seg.duration_s, self._prev_activity)
        self._prev_window = std.stretch32
        return x

    def note_activity(self, label: ActivityLabel | None) -> None:
        self._prev_activity = label
