"""Synthetic labeled recordings with exact ground truth.

Stands in for a real corpus: walking and jumping produce one raised-cosine
stretch burst per gait cycle with correlated accelerometer swing, the
sedentary activities sit at distinct stretch DC levels (sit highest, knee
bent; stand at the neutral level) with orientation-specific gravity
projections, and transitions ramp linearly between the neighboring levels.
The generator emits the exact activity intervals and per-cycle step times,
which is what makes it usable as a segmentation and classification oracle.

Signal levels are deliberately simple (sinusoid bursts + DC levels +
Gaussian noise) so separability claims stay analyzable. Per-user profiles
perturb gait frequency, movement amplitude, noise, wearing angle and how
far the sedentary levels spread, which is enough to make an unseen user
start poorly and still be recoverable by output-layer adaptation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .ingest import (
    DEFAULT_ACCEL_RATE_HZ,
    DEFAULT_STRETCH_RATE_HZ,
    LabelInterval,
    RawRecording,
    SensorStream,
    preprocess,
)
from .labels import ActivityLabel

NEUTRAL_PF = 391.0

# Resting capacitance per activity, before the per-user level_scale spread.
BASE_LEVEL_PF = {
    ActivityLabel.STAND: 391.0,
    ActivityLabel.WALK: 391.0,
    ActivityLabel.JUMP: 391.0,
    ActivityLabel.LIE_DOWN: 397.0,
    ActivityLabel.DRIVE: 428.0,
    ActivityLabel.SIT: 442.0,
}

# Gravity projection (ax, ay, az) in g for each activity's device pose.
ORIENTATION = {
    ActivityLabel.STAND: (0.06, 0.03, 0.995),
    ActivityLabel.WALK: (0.06, 0.03, 0.995),
    ActivityLabel.JUMP: (0.06, 0.03, 0.995),
    ActivityLabel.SIT: (0.28, 0.06, 0.955),
    ActivityLabel.DRIVE: (0.32, 0.08, 0.940),
    ActivityLabel.LIE_DOWN: (0.985, 0.06, 0.120),
}

WALK_AMP_PF = 22.0
JUMP_AMP_PF = 36.0
JUMP_RATE_FACTOR = 2.2  # jump cycles per gait cycle
DRIVE_VIBRATION_HZ = 13.0


@dataclass(frozen=True)
class UserProfile:
    """Per-user perturbation of the signal model."""

    gait_hz: float = 1.0
    stretch_amp: float = 1.0       # scales burst amplitudes and accel swing
    accel_noise_g: float = 0.03
    stretch_noise_pf: float = 0.3
    tilt_deg: float = 0.0          # wearing-angle rotation in the x-z plane
    level_scale: float = 1.0       # spread of the sedentary DC levels

    def __post_init__(self):
        if not 0.5 <= self.gait_hz <= 3.0:
            raise InputError(f"gait frequency {self.gait_hz} Hz outside [0.5, 3]")


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    script: tuple[tuple[ActivityLabel, float], ...]
    profile: UserProfile = UserProfile()
    stretch_rate_hz: float = DEFAULT_STRETCH_RATE_HZ
    accel_rate_hz: float = DEFAULT_ACCEL_RATE_HZ

    def __post_init__(self):
        if not self.script:
            raise InputError("empty activity script")
        normalized = []
        for label, duration in self.script:
            label = ActivityLabel(label)
            if duration <= 0:
                raise InputError(f"non-positive duration {duration} for {label.code}")
            normalized.append((label, float(duration)))
        object.__setattr__(self, "script", tuple(normalized))


@dataclass(frozen=True)
class GroundTruthEvent:
    t_ms: int
    kind: str                  # "activity" or "step"
    activity: ActivityLabel


@dataclass(frozen=True)
class SynthResult:
    raw: RawRecording
    labels: tuple[LabelInterval, ...]
    events: tuple[GroundTruthEvent, ...]


def _resting_level(label: ActivityLabel, profile: UserProfile) -> float:
    base = BASE_LEVEL_PF[label]
    return NEUTRAL_PF + profile.level_scale * (base - NEUTRAL_PF)


def _block_context(script, k, profile):
    """Ramp endpoints for a transition block: previous and next resting levels."""
    prev_label = script[k - 1][0] if k > 0 else ActivityLabel.STAND
    next_label = script[k + 1][0] if k + 1 < len(script) else ActivityLabel.STAND
    if prev_label is ActivityLabel.TRANSITION:
        prev_label = ActivityLabel.STAND
    if next_label is ActivityLabel.TRANSITION:
        next_label = ActivityLabel.STAND
    return prev_label, next_label


def _orientation_arrays(label_from, label_to, frac):
    o0 = np.array(ORIENTATION[label_from])
    o1 = np.array(ORIENTATION[label_to])
    return o0[None, :] + frac[:, None] * (o1 - o0)[None, :]


def generate_recording(config: SynthConfig) -> SynthResult:
    """Render the script into a raw recording plus its ground truth."""
    profile = config.profile
    rng = np.random.default_rng(config.seed)
    s_period = 1000.0 / config.stretch_rate_hz
    a_period = 1000.0 / config.accel_rate_hz

    durations_ms = [1000.0 * d for _, d in config.script]
    starts_ms = np.concatenate([[0.0], np.cumsum(durations_ms)])
    total_ms = starts_ms[-1]

    n_s = int(math.floor((total_ms - 1e-9) / s_period)) + 1
    n_a = int(math.floor((total_ms - 1e-9) / a_period)) + 1
    s_t = (np.arange(n_s) * int(round(s_period))).astype(np.int64)
    a_t = (np.arange(n_a) * int(round(a_period))).astype(np.int64)
    stretch = np.empty(n_s)
    accel = np.empty((n_a, 3))

    labels: list[LabelInterval] = []
    events: list[GroundTruthEvent] = []

    for k, (label, duration_s) in enumerate(config.script):
        t0, t1 = starts_ms[k], starts_ms[k + 1]
        labels.append(LabelInterval(int(round(t0)), int(round(t1)), label))
        events.append(GroundTruthEvent(int(round(t0)), "activity", label))

        s_lo, s_hi = np.searchsorted(s_t, [t0 - 1e-9, t1 - 1e-9])
        a_lo, a_hi = np.searchsorted(a_t, [t0 - 1e-9, t1 - 1e-9])
        tau_s = (s_t[s_lo:s_hi] - t0) / 1000.0   # seconds into the block
        tau_a = (a_t[a_lo:a_hi] - t0) / 1000.0
        amp = profile.stretch_amp

        if label in (ActivityLabel.WALK, ActivityLabel.JUMP):
            if label is ActivityLabel.WALK:
                freq = profile.gait_hz
                burst = WALK_AMP_PF * amp
            else:
                freq = JUMP_RATE_FACTOR * profile.gait_hz
                burst = JUMP_AMP_PF * amp
            level = _resting_level(label, profile)
            stretch[s_lo:s_hi] = level + burst * 0.5 * (1.0 - np.cos(2 * np.pi * freq * tau_s))
            ori = np.array(ORIENTATION[label])
            ax = np.full(tau_a.size, ori[0])
            ay = np.full(tau_a.size, ori[1])
            az = np.full(tau_a.size, ori[2])
            if label is ActivityLabel.WALK:
                ax = ax + 0.30 * amp * np.sin(2 * np.pi * freq * tau_a)
                az = az + 0.42 * amp * np.sin(2 * np.pi * freq * tau_a + 0.9)
                az = az + 0.12 * amp * np.sin(4 * np.pi * freq * tau_a + 0.3)
            else:
                ax = ax + 0.18 * amp * np.sin(2 * np.pi * freq * tau_a + 0.5)
                az = az + 0.95 * amp * np.sin(2 * np.pi * freq * tau_a)
            accel[a_lo:a_hi, 0] = ax
            accel[a_lo:a_hi, 1] = ay
            accel[a_lo:a_hi, 2] = az
            n_steps = int(math.floor(duration_s * freq - 1e-9)) + 1
            for step in range(n_steps):
                events.append(
                    GroundTruthEvent(int(round(t0 + 1000.0 * step / freq)), "step", label)
                )
        elif label is ActivityLabel.TRANSITION:
            prev_label, next_label = _block_context(config.script, k, profile)
            lvl0 = _resting_level(prev_label, profile)
            lvl1 = _resting_level(next_label, profile)
            frac_s = tau_s / duration_s
            frac_a = tau_a / duration_s
            stretch[s_lo:s_hi] = lvl0 + (lvl1 - lvl0) * frac_s
            accel[a_lo:a_hi] = _orientation_arrays(prev_label, next_label, frac_a)
        else:
            level = _resting_level(label, profile)
            stretch[s_lo:s_hi] = level
            ori = np.array(ORIENTATION[label])
            accel[a_lo:a_hi] = ori[None, :]
            if label is ActivityLabel.DRIVE:
                accel[a_lo:a_hi, 2] += 0.045 * np.sin(2 * np.pi * DRIVE_VIBRATION_HZ * tau_a)
                accel[a_lo:a_hi, 0] += 0.028 * np.sin(2 * np.pi * DRIVE_VIBRATION_HZ * tau_a + 1.1)

    stretch = stretch + rng.normal(0.0, profile.stretch_noise_pf, n_s)
    accel = accel + rng.normal(0.0, profile.accel_noise_g, (n_a, 3))
    if profile.tilt_deg:
        phi = math.radians(profile.tilt_deg)
        c, s = math.cos(phi), math.sin(phi)
        ax = accel[:, 0].copy()
        az = accel[:, 2].copy()
        accel[:, 0] = c * ax + s * az
        accel[:, 2] = -s * ax + c * az

    raw = RawRecording(
        stretch_t=s_t,
        stretch_pf=stretch,
        accel_t=a_t,
        accel_xyz=accel,
        stretch_rate_hz=config.stretch_rate_hz,
        accel_rate_hz=config.accel_rate_hz,
        stretch_clock_origin_ms=0,
        accel_clock_origin_ms=0,
    )
    events.sort(key=lambda e: (e.t_ms, e.kind))
    return SynthResult(raw=raw, labels=tuple(labels), events=tuple(events))


def generate_synthetic(config: SynthConfig) -> tuple[SensorStream, tuple[GroundTruthEvent, ...]]:
    """Generate and run the ingest chain: the stream the segmenter consumes,
    plus the exact boundary log."""
    result = generate_recording(config)
    stream = preprocess(result.raw, labels=result.labels)
    return stream, result.events


def default_script() -> tuple[tuple[ActivityLabel, float], ...]:
    """A varied script covering all seven classes, ~128 s long."""
    A = ActivityLabel
    return (
        (A.WALK, 12.0), (A.TRANSITION, 2.0),
        (A.SIT, 9.0), (A.TRANSITION, 2.0),
        (A.STAND, 8.0), (A.TRANSITION, 1.5),
        (A.JUMP, 8.0), (A.TRANSITION, 2.0),
        (A.LIE_DOWN, 9.0), (A.TRANSITION, 2.0),
        (A.DRIVE, 12.0), (A.TRANSITION, 2.0),
        (A.WALK, 10.0), (A.TRANSITION, 2.0),
        (A.STAND, 7.0), (A.TRANSITION, 1.5),
        (A.SIT, 8.0), (A.TRANSITION, 2.0),
        (A.LIE_DOWN, 7.0), (A.TRANSITION, 1.5),
        (A.JUMP, 6.0), (A.TRANSITION, 2.0),
        (A.DRIVE, 8.0),
    )


def training_profiles(n_users: int = 5, seed: int = 0) -> list[UserProfile]:
    """Mildly varied profiles for the offline-training user population."""
    rng = np.random.default_rng(seed)
    profiles = []
    for _ in range(n_users):
        profiles.append(
            UserProfile(
                gait_hz=float(rng.uniform(0.9, 1.15)),
                stretch_amp=float(rng.uniform(0.9, 1.1)),
                accel_noise_g=float(rng.uniform(0.025, 0.04)),
                stretch_noise_pf=float(rng.uniform(0.25, 0.35)),
                tilt_deg=float(rng.uniform(-2.0, 2.0)),
                level_scale=float(rng.uniform(0.95, 1.05)),
            )
        )
    return profiles


def new_user_profiles() -> dict[str, tuple[UserProfile, int]]:
    """Four held-out users whose perturbations drop a model trained on
    :func:`training_profiles` into the 60-80% range while staying
    recoverable by output-layer adaptation: each profile shifts whole
    feature groups (burst amplitude, gait rate, sedentary-level spread)
    with low within-user noise, so class clusters move across decision
    boundaries without merging. Values paired with the recording seed."""
    return {
        "user6": (UserProfile(gait_hz=0.95, stretch_amp=0.45, accel_noise_g=0.02,
                              stretch_noise_pf=0.2, tilt_deg=3.0, level_scale=0.95), 611),
        "user7": (UserProfile(gait_hz=1.0, stretch_amp=1.05, accel_noise_g=0.02,
                              stretch_noise_pf=0.2, tilt_deg=-2.0, level_scale=1.60), 814),
        "user8": (UserProfile(gait_hz=1.1, stretch_amp=0.38, accel_noise_g=0.02,
                              stretch_noise_pf=0.2, tilt_deg=1.0, level_scale=1.02), 818),
        "user9": (UserProfile(gait_hz=0.96, stretch_amp=0.44, accel_noise_g=0.02,
                              stretch_noise_pf=0.2, tilt_deg=2.0, level_scale=0.90), 812),
    }
