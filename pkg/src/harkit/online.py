"""Online adaptation of the output layer from user feedback.

The classifier's softmax output is treated as a policy over activities and
the greedy choice as the action. A user reward r in {-1, 0, +1} turns into
one ascent step on r * log pi(a_t), applied to the output-layer weights
only; the input layer was trained offline and stays bit-identical, so the
update for weight theta[j, i] is

    + alpha * r * (1 - pi(a_t)) * h_j      for i == a_t
    - alpha * r * pi(a_i)       * h_j      otherwise

which is the policy-gradient step with the 1/pi(a_t) factor already folded
in. No feedback (r == 0) changes nothing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError, NumericError
from .features import PREV_ACTIVITY_INDEX
from .labels import ActivityLabel, encode_previous
from .model import NetworkParams, Policy, forward


class RewardMode(str, enum.Enum):
    PER_SEGMENT = "PerSegment"
    PER_EPOCH = "PerEpoch"


@dataclass(frozen=True)
class RewardEvent:
    """One piece of user feedback tied to the decision it judges: the action
    taken and the policy snapshot (h and pi) at decision time."""

    reward: int                # -1, 0 (no feedback) or +1
    action: ActivityLabel
    policy: Policy

    def __post_init__(self):
        if self.reward not in (-1, 0, 1):
            raise InputError(f"reward must be -1, 0 or +1, got {self.reward}")


@dataclass(frozen=True)
class LearnerConfig:
    alpha: float = 0.01
    reward_mode: RewardMode = RewardMode.PER_SEGMENT
    episodes: int = 100
    runs: int = 5
    seed: int = 0
    # Previous-activity feature source during the session: the classifier's
    # own prior output (deployment behavior) or the ground-truth prior label.
    closed_loop_prev: bool = True

    def __post_init__(self):
        if self.alpha <= 0:
            raise InputError(f"learning rate must be positive, got {self.alpha}")


@dataclass(frozen=True)
class EpisodeLog:
    """Per-episode accuracy traces of an online-learning run."""

    traces: np.ndarray          # (runs, episodes)
    initial_accuracy: float     # inference accuracy before any update

    @property
    def mean_trace(self) -> np.ndarray:
        return self.traces.mean(axis=0)

    @property
    def final_accuracy(self) -> float:
        return float(self.mean_trace[-1])


def policy_gradient_wrt_outputs(policy: Policy, action: ActivityLabel) -> np.ndarray:
    """d pi(a_t) / d O_i for every output i: pi_t (1 - pi_t) at i = a_t and
    -pi_t pi_i elsewhere. Rows sum to zero."""
    t = action.value - 1
    pi_t = policy.probs[t]
    grad = -pi_t * policy.probs
    grad[t] = pi_t * (1.0 - pi_t)
    return grad


def update_weights(params: NetworkParams, event: RewardEvent, alpha: float) -> NetworkParams:
    """Apply one feedback event to the output layer.

    Returns a new params instance sharing the untouched input layer; with
    r == 0 the original instance is returned unchanged. A non-finite update
    (learning rate too large for the current activations) is rejected and
    reported without modifying anything.
    """
    if event.reward == 0:
        return params
    t = event.action.value - 1
    pi = event.policy.probs
    h = event.policy.hidden
    if h.shape != (params.n_hidden + 1,):
        raise InputError(
            f"policy snapshot hidden size {h.shape} does not match params (N_h={params.n_hidden})"
        )
    direction = -pi.copy()
    direction[t] = 1.0 - pi[t]
    with np.errstate(over="ignore", invalid="ignore"):
        new_theta = params.theta + (alpha * event.reward) * np.outer(h, direction)
    if not np.isfinite(new_theta).all():
        raise NumericError(
            f"non-finite weight update (alpha={alpha}, max |h|={np.max(np.abs(h)):.3g}); "
            "params left unchanged"
        )
    return replace(params, theta=new_theta)


def _with_prev(x: np.ndarray, prev: ActivityLabel | None) -> np.ndarray:
    out = x.copy()
    out[PREV_ACTIVITY_INDEX] = encode_previous(prev)
    return out


def session_accuracy(params: NetworkParams, segments, closed_loop_prev: bool = True) -> float:
    """Inference accuracy over a segment sequence without any updates,
    rolling the previous-activity feature the same way a session would."""
    if not segments:
        raise InputError("empty segment list")
    prev: ActivityLabel | None = None
    correct = 0
    for x, truth in segments:
        policy = forward(params, _with_prev(x, prev))
        action = ActivityLabel(int(np.argmax(policy.probs)) + 1)
        correct += action == truth
        prev = action if closed_loop_prev else truth
    return correct / len(segments)


def _epoch_slices(truths: list[ActivityLabel]) -> list[tuple[int, int]]:
    """Maximal runs of identical true label: the spans one user feedback covers."""
    spans = []
    start = 0
    for k in range(1, len(truths) + 1):
        if k == len(truths) or truths[k] != truths[start]:
            spans.append((start, k))
            start = k
    return spans


def run_feedback_session(
    params: NetworkParams,
    segments,
    config: LearnerConfig = LearnerConfig(),
) -> tuple[NetworkParams, list[float]]:
    """Adapt the output layer over ``config.episodes`` passes of the segment
    sequence and log accuracy after each episode.

    PerSegment mode rewards every classification individually (+1 correct,
    -1 wrong) and updates immediately. PerEpoch mode groups consecutive
    segments with the same true label into an epoch, classifies the whole
    epoch with frozen weights, then applies the epoch reward (+1 if the
    majority was correct, else -1) to every decision of the epoch using the
    policy snapshots from decision time.
    """
    if not segments:
        raise InputError("empty segment list")
    truths = [truth for _, truth in segments]
    accuracy: list[float] = []
    for _ in range(config.episodes):
        prev: ActivityLabel | None = None
        correct = 0
        if config.reward_mode is RewardMode.PER_SEGMENT:
            for x, truth in segments:
                policy = forward(params, _with_prev(x, prev))
                action = ActivityLabel(int(np.argmax(policy.probs)) + 1)
                hit = action == truth
                correct += hit
                reward = 1 if hit else -1
                params = update_weights(params, RewardEvent(reward, action, policy), config.alpha)
                prev = action if config.closed_loop_prev else truth
        else:
            for lo, hi in _epoch_slices(truths):
                events = []
                hits = 0
                for x, truth in segments[lo:hi]:
                    policy = forward(params, _with_prev(x, prev))
                    action = ActivityLabel(int(np.argmax(policy.probs)) + 1)
                    hit = action == truth
                    hits += hit
                    events.append((action, policy))
                    prev = action if config.closed_loop_prev else truth
                correct += hits
                reward = 1 if 2 * hits > (hi - lo) else -1
                for action, policy in events:
                    params = update_weights(params, RewardEvent(reward, action, policy), config.alpha)
        accuracy.append(correct / len(segments))
    return params, accuracy


def run_experiment(
    params: NetworkParams,
    per_user_segments: dict[str, list],
    config: LearnerConfig = LearnerConfig(),
) -> dict[str, EpisodeLog]:
    """Independent adaptation runs per user, averaged in the log.

    Each run starts from the same offline-trained params and differs only
    in its seeded shuffle of the user's segment order; the per-episode
    traces are stacked so callers can average them pointwise.
    """
    if config.runs < 1:
        raise InputError("runs must be >= 1")
    logs: dict[str, EpisodeLog] = {}
    for u_idx, (user, segments) in enumerate(per_user_segments.items()):
        initial = session_accuracy(params, segments, config.closed_loop_prev)
        traces = np.empty((config.runs, config.episodes))
        for run in range(config.runs):
            rng = np.random.default_rng(config.seed + 7919 * u_idx + run)
            order = rng.permutation(len(segments))
            shuffled = [segments[i] for i in order]
            _, trace = run_feedback_session(params, shuffled, config)
            traces[run] = trace
        logs[user] = EpisodeLog(traces=traces, initial_accuracy=initial)
    return logs
