import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parasac.errors import BufferWarmingUp
from parasac.replay import NStepWindow, ReplayBuffer, Transition, build_corrected_next, \
    oracle_nstep_target, survival


def tr(i, done=0.0, timeout=0.0):
    return Transition(np.array([float(i)]), np.array([0.1 * i]), float(i), np.array([i + 0.5]),
                      done, timeout)


def window(rewards, dones, timeouts, values):
    n = len(rewards)
    next_obs = np.arange(n, dtype=float)[:, None]
    return NStepWindow(np.zeros(1), np.zeros(1), np.array(rewards, float), np.array(dones, float),
                       np.array(timeouts, float), next_obs), (lambda o: values[int(o[0])])


def test_push_then_sample_reproduces_tuple():
    buf = ReplayBuffer(1, 8, 1, 1, dtype=np.float64)
    buf.push(0, tr(3, 1.0, 1.0))
    w = buf.sample_nstep(4, 1, np.random.default_rng(0))
    np.testing.assert_array_equal(w.obs, [[3.0]] * 4)
    np.testing.assert_array_equal(w.action, [[0.1 * 3]] * 4)
    np.testing.assert_array_equal(w.rewards, [[3.0]] * 4)
    np.testing.assert_array_equal(w.next_obs, [[[3.5]]] * 4)
    np.testing.assert_array_equal(w.dones, [[1.0]] * 4)
    np.testing.assert_array_equal(w.timeouts, [[1.0]] * 4)


def test_ring_evicts_oldest():
    buf = ReplayBuffer(1, 4, 1, 1, dtype=np.float64)
    for i in range(5):
        buf.push(0, tr(i))
    w = buf.sample_nstep(2000, 1, np.random.default_rng(0))
    assert set(w.obs[:, 0]) == {1.0, 2.0, 3.0, 4.0}


def test_inconsistent_masks_rejected():
    with pytest.raises(ValueError):
        Transition(np.zeros(1), np.zeros(1), 0.0, np.zeros(1), 0.0, 1.0)
    buf = ReplayBuffer(2, 4, 1, 1)
    with pytest.raises(ValueError):
        buf.push_batch(np.zeros((2, 1)), np.zeros((2, 1)), np.zeros(2), np.zeros((2, 1)),
                       np.array([0, 1]), np.array([1, 1]))


def test_non_finite_transition_rejected():
    with pytest.raises(ValueError):
        Transition(np.array([np.nan]), np.zeros(1), 0.0, np.zeros(1), 0.0, 0.0)


def test_corrected_next():
    post, pre = np.array([[1.0, 1.0]]), np.array([[2.0, 2.0]])
    np.testing.assert_array_equal(build_corrected_next(post, pre, np.array([0.0])), post)
    np.testing.assert_array_equal(build_corrected_next(post, pre, np.array([1.0])), pre)


def test_corrected_next_vectorized_matches_loop():
    rng = np.random.default_rng(0)
    post, pre = rng.standard_normal((8192, 3)), rng.standard_normal((8192, 3))
    b = rng.integers(0, 2, 8192).astype(float)
    out = build_corrected_next(post, pre, b)
    ref = np.stack([pre[i] if b[i] else post[i] for i in range(8192)])
    np.testing.assert_array_equal(out, ref)


def test_warming_up_signal():
    buf = ReplayBuffer(2, 10, 1, 1)
    with pytest.raises(BufferWarmingUp):
        buf.sample_nstep(4, 3, np.random.default_rng(0))
    buf.push(0, tr(0))
    buf.push(0, tr(1))
    with pytest.raises(BufferWarmingUp):
        buf.sample_nstep(4, 3, np.random.default_rng(0))


def test_exactly_n_transitions_gives_one_window():
    buf = ReplayBuffer(2, 10, 1, 1, dtype=np.float64)
    for i in range(3):
        buf.push(1, tr(i))
    w = buf.sample_nstep(50, 3, np.random.default_rng(0))
    assert np.all(w.env_ids == 1) and np.all(w.starts == 0)
    np.testing.assert_array_equal(w.rewards, [[0.0, 1.0, 2.0]] * 50)


def test_windows_never_cross_write_head():
    buf = ReplayBuffer(3, 7, 1, 1, dtype=np.float64)
    step = np.zeros(3)
    rng = np.random.default_rng(1)
    for t in range(20):
        mask = rng.random(3) < 0.8
        for e in np.nonzero(mask)[0]:
            buf.push(int(e), tr(step[e]))
            step[e] += 1
        if buf.ready(4):
            w = buf.sample_nstep(200, 4, rng)
            # rewards hold the env-local step index, so a valid window is consecutive
            assert np.all(np.diff(w.rewards, axis=1) == 1.0)


def test_sampling_proportional_to_window_counts():
    buf = ReplayBuffer(2, 100, 1, 1)
    for i in range(30):
        buf.push(0, tr(i))
    for i in range(80):
        buf.push(1, tr(i))
    n, draws = 5, 100_000
    w = buf.sample_nstep(draws, n, np.random.default_rng(0))
    counts = buf.window_counts(n)               # [26, 76]
    p = counts[0] / counts.sum()
    hits = np.sum(w.env_ids == 0)
    sd = np.sqrt(draws * p * (1 - p))
    assert abs(hits - draws * p) < 3 * sd
    starts0 = w.starts[w.env_ids == 0]
    assert starts0.min() == 0 and starts0.max() == counts[0] - 1


def test_oracle_examples():
    w, v = window([1, 1], [0, 0], [0, 0], {1: 4.0})
    assert oracle_nstep_target(w, v, 0.5, 2) == pytest.approx(2.5)
    w, v = window([1, 1], [0, 1], [0, 0], {})
    assert oracle_nstep_target(w, v, 0.5, 2) == pytest.approx(1.5)
    w, v = window([1, 1], [0, 1], [0, 1], {1: 4.0})
    assert oracle_nstep_target(w, v, 0.5, 2) == pytest.approx(2.5)


def test_first_step_failure_masks_rest():
    w, v = window([2, 5, 7], [1, 0, 0], [0, 0, 0], {})
    assert oracle_nstep_target(w, v, 0.9, 3) == 2.0
    w, v = window([2, 5, 7], [1, 0, 0], [1, 0, 0], {0: 10.0})
    assert oracle_nstep_target(w, v, 0.9, 3) == pytest.approx(2.0 + 0.9 * 10.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=10))
def test_survival_properties(dones):
    s = survival(np.array(dones, float))
    assert s[0] == 1.0
    assert np.all(np.diff(s) <= 0)
    assert set(np.unique(s)) <= {0.0, 1.0}


def test_state_dict_round_trip():
    buf = ReplayBuffer(2, 5, 1, 1)
    for i in range(7):
        buf.push(i % 2, tr(i))
    other = ReplayBuffer(2, 5, 1, 1)
    other.load_state_dict(buf.state_dict())
    rng1, rng2 = np.random.default_rng(3), np.random.default_rng(3)
    a, b = buf.sample_nstep(16, 2, rng1), other.sample_nstep(16, 2, rng2)
    np.testing.assert_array_equal(a.rewards, b.rewards)
    np.testing.assert_array_equal(a.obs, b.obs)
