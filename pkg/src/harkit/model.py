"""The compact feed-forward classifier: 117 inputs, one ReLU hidden layer,
softmax over the 7 activities.

The output layer is written in terms of the hidden activations h (with the
bias folded in as h[N_h] = 1) so the online learner can update it in
isolation:

    O_i = sum_j h_j * theta[j, i]          pi = softmax(O)

Stored weights are 4-byte reals: at the default 4 hidden neurons that is
118*4 + 5*7 = 507 weights, about 2 kB, which is what makes the model fit a
small MCU alongside everything else. In-memory arithmetic stays float64; a
per-feature z-score scaler (fit on the training split) is stored with the
weights and applied inside ``forward``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InputError, NumericError
from .features import FEATURE_DIM
from .labels import ActivityLabel, N_ACTIVITIES

STORED_WEIGHT_BYTES = 4
MODEL_MAGIC = b"HARN"
MODEL_VERSION = 1
DEFAULT_HIDDEN = 4


def weight_count(n_hidden: int, n_activities: int = N_ACTIVITIES) -> int:
    """Stored weights: (117+1)*N_h input-layer plus (N_h+1)*N_A output-layer."""
    return (FEATURE_DIM + 1) * n_hidden + (n_hidden + 1) * n_activities


def weight_bytes(n_hidden: int, n_activities: int = N_ACTIVITIES) -> int:
    return weight_count(n_hidden, n_activities) * STORED_WEIGHT_BYTES


@dataclass(frozen=True)
class NetworkParams:
    """Classifier weights plus the input scaler.

    theta_in: (118, N_h), last row is the input bias.
    theta:    (N_h+1, N_A), last row is the hidden bias weight.
    Treated as immutable: every update produces a new instance.
    """

    theta_in: np.ndarray
    theta: np.ndarray
    scaler_mean: np.ndarray
    scaler_std: np.ndarray

    def __post_init__(self):
        if self.theta_in.shape[0] != FEATURE_DIM + 1:
            raise InputError(f"theta_in must have {FEATURE_DIM + 1} rows, got {self.theta_in.shape}")
        if self.theta.shape != (self.n_hidden + 1, N_ACTIVITIES):
            raise InputError(f"theta shape {self.theta.shape} does not match theta_in {self.theta_in.shape}")
        if self.scaler_mean.shape != (FEATURE_DIM,) or self.scaler_std.shape != (FEATURE_DIM,):
            raise InputError("scaler must provide one (mean, std) pair per feature")
        if not (
            np.isfinite(self.theta_in).all()
            and np.isfinite(self.theta).all()
            and np.isfinite(self.scaler_mean).all()
            and np.isfinite(self.scaler_std).all()
        ):
            raise NumericError("non-finite values in network parameters")

    @property
    def n_hidden(self) -> int:
        return self.theta_in.shape[1]

    @property
    def n_activities(self) -> int:
        return self.theta.shape[1]

    @property
    def weight_count(self) -> int:
        return weight_count(self.n_hidden, self.n_activities)

    @property
    def weight_bytes(self) -> int:
        return self.weight_count * STORED_WEIGHT_BYTES


@dataclass(frozen=True)
class Policy:
    """Softmax output for one input: activity probabilities plus the hidden
    activations (bias included) they were computed from."""

    probs: np.ndarray   # (N_A,), sums to 1
    hidden: np.ndarray  # (N_h+1,), hidden[-1] == 1


def identity_scaler() -> tuple[np.ndarray, np.ndarray]:
    return np.zeros(FEATURE_DIM), np.ones(FEATURE_DIM)


def init_params(
    n_hidden: int = DEFAULT_HIDDEN,
    seed: int = 0,
    scaler: tuple[np.ndarray, np.ndarray] | None = None,
) -> NetworkParams:
    """Seeded uniform initialization in +/- sqrt(6 / (fan_in + fan_out)),
    biases zero."""
    rng = np.random.default_rng(seed)
    lim_in = np.sqrt(6.0 / (FEATURE_DIM + n_hidden))
    lim_out = np.sqrt(6.0 / (n_hidden + N_ACTIVITIES))
    theta_in = np.zeros((FEATURE_DIM + 1, n_hidden))
    theta_in[:FEATURE_DIM] = rng.uniform(-lim_in, lim_in, size=(FEATURE_DIM, n_hidden))
    theta = np.zeros((n_hidden + 1, N_ACTIVITIES))
    theta[:n_hidden] = rng.uniform(-lim_out, lim_out, size=(n_hidden, N_ACTIVITIES))
    mean, std = scaler if scaler is not None else identity_scaler()
    return NetworkParams(theta_in=theta_in, theta=theta, scaler_mean=mean.copy(), scaler_std=std.copy())


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_input(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (FEATURE_DIM,):
        raise InputError(f"feature vector must have shape ({FEATURE_DIM},), got {v.shape}")
    if not np.isfinite(v).all():
        raise InputError("non-finite value in feature vector")
    return v


def hidden_activations(params: NetworkParams, x) -> np.ndarray:
    """Scale the input, apply the hidden layer, append the bias term."""
    v = _check_input(x)
    v = (v - params.scaler_mean) / params.scaler_std
    z = np.append(v, 1.0) @ params.theta_in
    h = np.maximum(z, 0.0)
    return np.append(h, 1.0)


def forward(params: NetworkParams, x) -> Policy:
    """Full inference pass: returns the activity probabilities and the
    hidden activations used to produce them."""
    hb = hidden_activations(params, x)
    logits = hb @ params.theta
    return Policy(probs=_softmax(logits), hidden=hb)


def classify(params: NetworkParams, x) -> ActivityLabel:
    """Most probable activity; ties break toward the lowest label index."""
    policy = forward(params, x)
    return ActivityLabel(int(np.argmax(policy.probs)) + 1)


# ---------------------------------------------------------------------------
# Offline supervised training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    n_hidden: int = DEFAULT_HIDDEN
    epochs: int = 1500
    learning_rate: float = 0.2
    momentum: float = 0.9
    seed: int = 0
    test_fraction: float = 0.2


@dataclass(frozen=True)
class TrainReport:
    train_accuracy: float
    test_accuracy: float
    overall_accuracy: float
    final_loss: float
    n_train: int
    n_test: int


def _as_arrays(dataset) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for x, y in dataset:
        xs.append(_check_input(x))
        ys.append(int(y) - 1)
    return np.array(xs), np.array(ys, dtype=int)


def _stratified_split(y: np.ndarray, test_fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Per-class proportional split so no class can vanish from training."""
    train_idx, test_idx = [], []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        n_test = int(round(idx.size * test_fraction))
        if test_fraction > 0 and idx.size > 1:
            n_test = min(max(n_test, 1), idx.size - 1)
        test_idx.extend(idx[:n_test])
        train_idx.extend(idx[n_test:])
    return np.sort(np.array(train_idx, dtype=int)), np.sort(np.array(test_idx, dtype=int))


def _forward_batch(theta_in, theta, xb):
    z = xb @ theta_in
    h = np.maximum(z, 0.0)
    hb = np.concatenate([h, np.ones((h.shape[0], 1))], axis=1)
    logits = hb @ theta
    return z, hb, _softmax(logits)


def _accuracy(theta_in, theta, xb, y) -> float:
    _, _, probs = _forward_batch(theta_in, theta, xb)
    return float(np.mean(np.argmax(probs, axis=1) == y))


def _loss_and_grads(theta_in, theta, xb, y_idx):
    """Mean cross-entropy over the batch and its gradients for both layers."""
    n = xb.shape[0]
    z, hb, probs = _forward_batch(theta_in, theta, xb)
    loss = float(-np.mean(np.log(probs[np.arange(n), y_idx] + 1e-300)))
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), y_idx] = 1.0
    d_logits = (probs - onehot) / n
    grad_theta = hb.T @ d_logits
    d_h = (d_logits @ theta.T)[:, :-1] * (z > 0.0)
    grad_theta_in = xb.T @ d_h
    return loss, grad_theta_in, grad_theta


def train_supervised(dataset, config: TrainConfig = TrainConfig()) -> tuple[NetworkParams, TrainReport]:
    """Full-batch gradient descent on cross-entropy over the whole network.

    Deterministic for a fixed config: the split, the scaler and the descent
    depend only on the seed. Raises on single-class data and on a
    non-finite loss.
    """
    x, y = _as_arrays(dataset)
    if x.shape[0] == 0:
        raise InputError("empty training dataset")
    if np.unique(y).size < 2:
        raise InputError("training dataset must contain at least 2 classes")

    rng = np.random.default_rng(config.seed)
    train_idx, test_idx = _stratified_split(y, config.test_fraction, rng)
    x_train, y_train = x[train_idx], y[train_idx]

    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    std[std == 0.0] = 1.0

    params0 = init_params(config.n_hidden, seed=config.seed, scaler=(mean, std))
    theta_in = params0.theta_in.copy()
    theta = params0.theta.copy()

    xs = (x_train - mean) / std
    xb = np.concatenate([xs, np.ones((xs.shape[0], 1))], axis=1)

    vel_in = np.zeros_like(theta_in)
    vel_out = np.zeros_like(theta)
    loss = np.inf
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            loss, grad_theta_in, grad_theta = _loss_and_grads(theta_in, theta, xb, y_train)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch} (full batch)")
            vel_out = config.momentum * vel_out - config.learning_rate * grad_theta
            vel_in = config.momentum * vel_in - config.learning_rate * grad_theta_in
            theta = theta + vel_out
            theta_in = theta_in + vel_in

    params = NetworkParams(theta_in=theta_in, theta=theta, scaler_mean=mean, scaler_std=std)
    x_all = (x - mean) / std
    xb_all = np.concatenate([x_all, np.ones((x_all.shape[0], 1))], axis=1)
    report = TrainReport(
        train_accuracy=_accuracy(theta_in, theta, xb_all[train_idx], y[train_idx]),
        test_accuracy=(
            _accuracy(theta_in, theta, xb_all[test_idx], y[test_idx]) if test_idx.size else float("nan")
        ),
        overall_accuracy=_accuracy(theta_in, theta, xb_all, y),
        final_loss=loss,
        n_train=int(train_idx.size),
        n_test=int(test_idx.size),
    )
    return params, report


@dataclass(frozen=True)
class SweepPoint:
    n_hidden: int
    train_accuracy: float
    test_accuracy: float
    overall_accuracy: float
    weight_count: int
    weight_bytes: int


def sweep_hidden(dataset, n_h_range=range(1, 8), config: TrainConfig = TrainConfig()) -> list[SweepPoint]:
    """Train one model per hidden-layer size and report accuracy against
    the stored-weight footprint."""
    points = []
    for n_h in n_h_range:
        _, report = train_supervised(dataset, replace(config, n_hidden=n_h))
        points.append(
            SweepPoint(
                n_hidden=n_h,
                train_accuracy=report.train_accuracy,
                test_accuracy=report.test_accuracy,
                overall_accuracy=report.overall_accuracy,
                weight_count=weight_count(n_h),
                weight_bytes=weight_bytes(n_h),
            )
        )
    return points


# ---------------------------------------------------------------------------
# Model file format
# ---------------------------------------------------------------------------
# magic "HARN", then <u16 version, u16 N_h, u16 N_A>, then theta_in and theta
# row-major as little-endian 4-byte reals, then the 117 scaler (mean, std)
# pairs as little-endian 8-byte reals.

_HEADER = struct.Struct("<HHH")


def save_model(params: NetworkParams, path: str | Path) -> None:
    blob = bytearray()
    blob += MODEL_MAGIC
    blob += _HEADER.pack(MODEL_VERSION, params.n_hidden, params.n_activities)
    blob += params.theta_in.astype("<f4").tobytes(order="C")
    blob += params.theta.astype("<f4").tobytes(order="C")
    scaler = np.column_stack([params.scaler_mean, params.scaler_std])
    blob += scaler.astype("<f8").tobytes(order="C")
    Path(path).write_bytes(bytes(blob))


def load_model(path: str | Path) -> NetworkParams:
    blob = Path(path).read_bytes()
    if len(blob) < 4 + _HEADER.size:
        raise InputError(f"model file {path}: truncated header")
    if blob[:4] != MODEL_MAGIC:
        raise InputError(f"model file {path}: bad magic {blob[:4]!r}")
    version, n_h, n_a = _HEADER.unpack_from(blob, 4)
    if version != MODEL_VERSION:
        raise InputError(f"model file {path}: unsupported version {version}")
    if n_a != N_ACTIVITIES or n_h < 1:
        raise InputError(f"model file {path}: dimension header mismatch (N_h={n_h}, N_A={n_a})")
    n_in = (FEATURE_DIM + 1) * n_h
    n_out = (n_h + 1) * n_a
    expected = 4 + _HEADER.size + (n_in + n_out) * 4 + FEATURE_DIM * 2 * 8
    if len(blob) != expected:
        raise InputError(
            f"model file {path}: expected {expected} bytes for N_h={n_h}, got {len(blob)}"
        )
    off = 4 + _HEADER.size
    theta_in = np.frombuffer(blob, dtype="<f4", count=n_in, offset=off).astype(float)
    off += n_in * 4
    theta = np.frombuffer(blob, dtype="<f4", count=n_out, offset=off).astype(float)
    off += n_out * 4
    scaler = np.frombuffer(blob, dtype="<f8", count=FEATURE_DIM * 2, offset=off).astype(float)
    return NetworkParams(
        theta_in=theta_in.reshape(FEATURE_DIM + 1, n_h),
        theta=theta.reshape(n_h + 1, n_a),
        scaler_mean=scaler.reshape(FEATURE_DIM, 2)[:, 0].copy(),
        scaler_std=scaler.reshape(FEATURE_DIM, 2)[:, 1].copy(),
    )
