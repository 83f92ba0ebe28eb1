import numpy as np
import pytest

import harkit as hk
from harkit.errors import InputError, NumericError
from harkit.features import FEATURE_DIM, PREV_ACTIVITY_INDEX
from harkit.model import _softmax
from harkit.online import _epoch_slices


def uniform_policy(n_hidden=4):
    return hk.Policy(probs=np.full(7, 1.0 / 7.0), hidden=np.ones(n_hidden + 1))


def random_case(rng, n_hidden=4):
    params = hk.init_params(n_hidden, seed=int(rng.integers(2 ** 31)))
    x = rng.normal(size=FEATURE_DIM)
    action = hk.ActivityLabel(int(rng.integers(1, 8)))
    return params, x, action


# --- gradient of the policy wrt output pre-activations ------------------------


def test_policy_gradient_uniform_values():
    g = hk.policy_gradient_wrt_outputs(uniform_policy(), hk.ActivityLabel.DRIVE)
    assert g[0] == pytest.approx(6.0 / 49.0, rel=1e-12)
    assert np.allclose(g[1:], -1.0 / 49.0, rtol=1e-12)


def test_policy_gradient_rows_sum_to_zero():
    rng = np.random.default_rng(0)
    for _ in range(200):
        logits = rng.normal(0, 3, size=7)
        pol = hk.Policy(probs=_softmax(logits), hidden=np.ones(5))
        a = hk.ActivityLabel(int(rng.integers(1, 8)))
        assert abs(hk.policy_gradient_wrt_outputs(pol, a).sum()) < 1e-12


def test_policy_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    eps = 1e-6
    for _ in range(100):
        logits = rng.normal(0, 2, size=7)
        t = int(rng.integers(7))
        pol = hk.Policy(probs=_softmax(logits), hidden=np.ones(5))
        g = hk.policy_gradient_wrt_outputs(pol, hk.ActivityLabel(t + 1))
        for i in range(7):
            plus, minus = logits.copy(), logits.copy()
            plus[i] += eps
            minus[i] -= eps
            fd = (_softmax(plus)[t] - _softmax(minus)[t]) / (2 * eps)
            assert g[i] == pytest.approx(fd, rel=1e-7, abs=1e-10)


# --- the weight update ---------------------------------------------------------


def test_zero_reward_returns_params_unchanged():
    params = hk.init_params(4, seed=0)
    event = hk.RewardEvent(0, hk.ActivityLabel.WALK, uniform_policy())
    assert hk.update_weights(params, event, 0.01) is params


def test_update_uniform_policy_unit_hidden():
    params = hk.init_params(4, seed=0)
    event = hk.RewardEvent(1, hk.ActivityLabel.DRIVE, uniform_policy())
    alpha = 0.05
    new = hk.update_weights(params, event, alpha)
    delta = new.theta - params.theta
    assert np.allclose(delta[:, 0], alpha * 6.0 / 7.0, rtol=1e-12)
    assert np.allclose(delta[:, 1:], -alpha / 7.0, rtol=1e-12)


def test_update_leaves_input_layer_bit_identical():
    rng = np.random.default_rng(2)
    params, x, action = random_case(rng)
    before = params.theta_in.tobytes()
    pol = hk.forward(params, x)
    new = hk.update_weights(params, hk.RewardEvent(1, action, pol), 0.01)
    assert new.theta_in.tobytes() == before
    assert new.theta_in is params.theta_in


def test_update_column_sums_zero():
    rng = np.random.default_rng(3)
    for _ in range(100):
        params, x, action = random_case(rng)
        pol = hk.forward(params, x)
        new = hk.update_weights(params, hk.RewardEvent(-1, action, pol), 0.02)
        delta = new.theta - params.theta
        assert np.max(np.abs(delta.sum(axis=1))) < 1e-12 * max(1.0, np.max(np.abs(delta)))


def test_update_equals_alpha_r_grad_log_pi():
    rng = np.random.default_rng(4)
    eps = 1e-6
    for _ in range(30):
        params, x, action = random_case(rng)
        pol = hk.forward(params, x)
        r = 1 if rng.random() < 0.5 else -1
        alpha = 0.01
        delta = hk.update_weights(params, hk.RewardEvent(r, action, pol), alpha).theta - params.theta
        t = action.value - 1
        fd = np.zeros_like(params.theta)
        for idx in np.ndindex(params.theta.shape):
            plus, minus = params.theta.copy(), params.theta.copy()
            plus[idx] += eps
            minus[idx] -= eps
            lp = np.log(_softmax(pol.hidden @ plus)[t])
            lm = np.log(_softmax(pol.hidden @ minus)[t])
            fd[idx] = (lp - lm) / (2 * eps)
        assert np.allclose(delta, alpha * r * fd, rtol=1e-5, atol=1e-10)


def test_positive_reward_strictly_increases_pi():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        params, x, action = random_case(rng)
        pol = hk.forward(params, x)
        new = hk.update_weights(params, hk.RewardEvent(1, action, pol), 0.1)
        assert hk.forward(new, x).probs[action.value - 1] > pol.probs[action.value - 1]


def test_negative_reward_on_true_class_decreases_pi_monotonically():
    rng = np.random.default_rng(6)
    params, x, action = random_case(rng)
    last = hk.forward(params, x).probs[action.value - 1]
    for _ in range(10):
        pol = hk.forward(params, x)
        params = hk.update_weights(params, hk.RewardEvent(-1, action, pol), 0.05)
        now = hk.forward(params, x).probs[action.value - 1]
        assert now < last
        last = now


def test_non_finite_update_rejected():
    params = hk.init_params(4, seed=0)
    pol = hk.Policy(probs=np.full(7, 1.0 / 7.0), hidden=np.full(5, 1e200))
    with pytest.raises(NumericError):
        hk.update_weights(params, hk.RewardEvent(1, hk.ActivityLabel.SIT, pol), 1e200)


def test_reward_event_validates_reward():
    with pytest.raises(InputError):
        hk.RewardEvent(2, hk.ActivityLabel.SIT, uniform_policy())


# --- sessions ------------------------------------------------------------------


def _inert_prev_params():
    """Classifies by feature 0 only (>1 -> Drive, else Jump); the
    previous-activity slot is disconnected so closed-loop rewrites of it
    cannot change decisions. Logit scale kept moderate so pi stays away
    from saturation."""
    p = hk.init_params(1, seed=0)
    theta_in = np.zeros_like(p.theta_in)
    theta_in[0, 0] = 1.0
    theta = np.zeros_like(p.theta)
    theta[0, 0] = 1.5    # hidden0 -> Drive logit
    theta[1, 1] = 1.0    # bias -> Jump logit
    return hk.NetworkParams(theta_in=theta_in, theta=theta,
                            scaler_mean=p.scaler_mean, scaler_std=p.scaler_std)


def _toy_segments(n_pairs=6):
    xs = []
    for _ in range(n_pairs):
        xd = np.zeros(FEATURE_DIM)
        xd[0] = 2.0
        xs.append((xd, hk.ActivityLabel.DRIVE))
        xs.append((np.zeros(FEATURE_DIM), hk.ActivityLabel.JUMP))
    return xs


def test_perfect_classifier_stays_perfect_and_grows_confident():
    params = _inert_prev_params()
    segments = _toy_segments()
    config = hk.LearnerConfig(alpha=0.01, episodes=5, runs=1)
    new, trace = hk.run_feedback_session(params, segments, config)
    assert trace == [1.0] * 5
    # confidence drift: every segment's pi(a_t) ends at least where it began
    for x, truth in segments:
        before = hk.forward(params, x).probs[truth.value - 1]
        after = hk.forward(new, x).probs[truth.value - 1]
        assert after >= before


def test_session_accuracy_matches_trace_without_updates():
    params = _inert_prev_params()
    segments = _toy_segments()
    assert hk.session_accuracy(params, segments) == 1.0


def test_epoch_slices_are_maximal_runs():
    A = hk.ActivityLabel
    labels = [A.WALK, A.WALK, A.SIT, A.SIT, A.SIT, A.WALK]
    assert _epoch_slices(labels) == [(0, 2), (2, 5), (5, 6)]


def test_per_epoch_reward_majority():
    # Drive epoch (all right) earns +1, Jump epoch (all wrong under a skewed
    # model) earns -1; both applied to every decision of their epoch.
    params = _inert_prev_params()
    A = hk.ActivityLabel
    xd = np.zeros(FEATURE_DIM)
    xd[0] = 2.0
    xj = np.zeros(FEATURE_DIM)
    xj[0] = 3.0  # reads as Drive, truth Jump
    segments = [(xd, A.DRIVE), (xd, A.DRIVE), (xj, A.JUMP), (xj, A.JUMP)]
    config = hk.LearnerConfig(alpha=0.01, episodes=1, reward_mode=hk.RewardMode.PER_EPOCH)
    _, trace = hk.run_feedback_session(params, segments, config)
    assert trace == [0.5]
    # isolated wrong epoch: its -1 reward must push the mistaken Drive
    # probability down on those activations
    wrong_only = [(xj, A.JUMP), (xj, A.JUMP)]
    new, trace = hk.run_feedback_session(params, wrong_only, config)
    assert trace == [0.0]
    assert hk.forward(new, xj).probs[0] < hk.forward(params, xj).probs[0]


def test_per_epoch_equals_per_segment_when_perfect():
    params = _inert_prev_params()
    segments = _toy_segments(4)
    c_seg = hk.LearnerConfig(alpha=0.01, episodes=3, reward_mode=hk.RewardMode.PER_SEGMENT)
    c_ep = hk.LearnerConfig(alpha=0.01, episodes=3, reward_mode=hk.RewardMode.PER_EPOCH)
    p1, t1 = hk.run_feedback_session(params, segments, c_seg)
    p2, t2 = hk.run_feedback_session(params, segments, c_ep)
    assert t1 == t2 == [1.0, 1.0, 1.0]


def test_session_rejects_empty():
    with pytest.raises(InputError):
        hk.run_feedback_session(hk.init_params(4, seed=0), [], hk.LearnerConfig())


def test_closed_loop_prev_feature_follows_predictions():
    # A model whose second decision hinges on the previous-activity slot:
    # hidden1 fires only when the previous label index is >= 2, steering the
    # prediction to LIE_DOWN. A wrong first prediction (D instead of J) then
    # produces different second decisions in closed-loop vs ground-truth mode.
    p = hk.init_params(2, seed=0)
    theta_in = np.zeros_like(p.theta_in)
    theta_in[0, 0] = 1.0                      # hidden0 = relu(x0)
    theta_in[PREV_ACTIVITY_INDEX, 1] = 7.0    # hidden1 = relu(7*prev - 1.5)
    theta_in[-1, 1] = -1.5
    theta = np.zeros_like(p.theta)
    theta[0, hk.ActivityLabel.DRIVE.value - 1] = 1.5
    theta[-1, hk.ActivityLabel.JUMP.value - 1] = 1.0
    theta[1, hk.ActivityLabel.LIE_DOWN.value - 1] = 4.0
    params = hk.NetworkParams(theta_in=theta_in, theta=theta,
                              scaler_mean=p.scaler_mean, scaler_std=p.scaler_std)
    xa = np.zeros(FEATURE_DIM)
    xa[0] = 2.0                               # classified D, truth J
    xb = np.zeros(FEATURE_DIM)                # J unless prev steers to L
    segments = [(xa, hk.ActivityLabel.JUMP), (xb, hk.ActivityLabel.JUMP)]
    # closed loop: prev = predicted D (index 1) -> hidden1 silent -> J correct
    assert hk.session_accuracy(params, segments, closed_loop_prev=True) == 0.5
    # ground truth: prev = J (index 2) -> hidden1 fires -> L, wrong
    assert hk.session_accuracy(params, segments, closed_loop_prev=False) == 0.0


def test_run_experiment_single_run_is_identity_average():
    params = _inert_prev_params()
    per_user = {"u": _toy_segments(3)}
    config = hk.LearnerConfig(alpha=0.01, episodes=4, runs=1, seed=7)
    logs = hk.run_experiment(params, per_user, config)
    log = logs["u"]
    assert log.traces.shape == (1, 4)
    assert np.array_equal(log.mean_trace, log.traces[0])


def test_run_experiment_deterministic():
    params = _inert_prev_params()
    per_user = {"u": _toy_segments(3)}
    config = hk.LearnerConfig(alpha=0.01, episodes=4, runs=3, seed=7)
    a = hk.run_experiment(params, per_user, config)["u"].traces
    b = hk.run_experiment(params, per_user, config)["u"].traces
    assert np.array_equal(a, b)


def test_run_experiment_rejects_zero_runs():
    with pytest.raises(InputError):
        hk.run_experiment(
            _inert_prev_params(), {"u": _toy_segments(1)}, hk.LearnerConfig(runs=0)
        )


def test_learner_config_validates_alpha():
    with pytest.raises(InputError):
        hk.LearnerConfig(alpha=0.0)
