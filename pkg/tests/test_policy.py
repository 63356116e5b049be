import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parasac.approximator import MlpParams, gradient_check
from parasac.bounds import ActionBounds
from parasac.errors import ConfigError, DivergenceError
from parasac.policy import PolicyNet, actor_init, entropy_estimate, log_one_minus_tanh_sq, \
    log_prob, log_prob_backward, policy_forward, sample_action
from parasac.runner.verify import constant_head_policy, squashed_density_mass

SYM = ActionBounds.symmetric(1.0, 1)


def test_init_log_std_is_constant():
    pol = actor_init([5, 16, 8], 3, init_std=0.15, seed=0)
    obs = np.random.default_rng(1).standard_normal((50, 5)) * 10
    _, log_std, _, _ = policy_forward(pol, obs)
    np.testing.assert_array_equal(log_std, np.full((50, 3), np.log(0.15)))
    np.testing.assert_allclose(np.exp(log_std), 0.15)
    assert np.all(pol.log_std_weight == 0)
    assert np.all(pol.mean_bias == 0)


def test_init_rejects_std_outside_clamp():
    with pytest.raises(ConfigError):
        actor_init([2, 4], 1, init_std=10.0)
    with pytest.raises(ConfigError):
        actor_init([2, 4], 1, init_std=1e-4)


def test_mean_head_weights_centered():
    # pooled over many seeds; std of the pooled mean is 0.01 / sqrt(N)
    w = np.concatenate([actor_init([2, 8], 2, seed=s).mean_weight.ravel() for s in range(2000)])
    assert abs(w.mean()) < 3 * 0.01 / np.sqrt(w.size)
    assert w.std() == pytest.approx(0.01, rel=0.05)


def test_fresh_policy_centers_actions():
    bounds = ActionBounds(np.array([-2.4, -1.0]), np.array([0.6, 3.0]))
    pol = actor_init([4, 16], 2, seed=0)
    s = sample_action(pol, np.zeros((1, 4)), bounds, deterministic=True)
    np.testing.assert_allclose(s.action[0], bounds.center, atol=1e-12)
    assert s.log_prob is None


def test_zero_noise_gives_squashed_mean():
    bounds = ActionBounds(np.array([-1.0]), np.array([3.0]))
    pol = constant_head_policy(0.7, 0.5)
    s = sample_action(pol, np.zeros((1, 1)), bounds, noise=np.zeros((1, 1)))
    np.testing.assert_allclose(s.action, [[1.0 + 2.0 * np.tanh(0.7)]])


def test_log_prob_standard_case():
    pol = constant_head_policy(0.0, 1.0)
    lp = log_prob(pol, np.zeros((1, 1)), np.zeros((1, 1)), SYM)
    assert lp[0] == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-12)


def test_scaling_c_shifts_log_prob():
    pol = constant_head_policy(0.3, 0.4)
    x = np.array([[0.2]])
    base = log_prob(pol, np.zeros((1, 1)), x, SYM)[0]
    wide = log_prob(pol, np.zeros((1, 1)), x, ActionBounds.symmetric(5.0, 1))[0]
    assert wide - base == pytest.approx(-np.log(5.0), abs=1e-12)


def test_log_one_minus_tanh_sq_is_stable():
    x = np.array([-50.0, -1.0, 0.0, 1.0, 50.0])
    ref = np.log1p(-np.tanh(x[1:4]) ** 2)
    out = log_one_minus_tanh_sq(x)
    np.testing.assert_allclose(out[1:4], ref, rtol=1e-12)
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out[[0, 4]], 2 * np.log(2) - 100, rtol=1e-12)


@pytest.mark.parametrize("mu,sigma,b,c", [(0.0, 1.0, 0.0, 1.0), (1.5, 0.05, -2.0, 0.3),
                                          (-1.0, 2.5, 3.0, 4.0)])
def test_density_integrates_to_one(mu, sigma, b, c):
    assert squashed_density_mass(mu, sigma, b, c) == pytest.approx(1.0, abs=1e-3)


def test_entropy_estimate():
    assert entropy_estimate(np.full(4, -2.0)) == 2.0
    assert entropy_estimate(np.array([-0.5])) == 0.5
    with pytest.raises(ValueError):
        entropy_estimate(np.array([]))


def test_entropy_matches_gaussian_for_small_sigma():
    sigma = 0.05
    pol = constant_head_policy(0.0, sigma)
    bounds = ActionBounds.symmetric(100.0, 1)
    s = sample_action(pol, np.zeros((100_000, 1)), bounds, np.random.default_rng(0))
    # squashed-density entropy = Gaussian entropy + log c + E[log(1 - tanh^2 x)]
    h = entropy_estimate(s.log_prob) - np.log(100.0)
    assert h == pytest.approx(0.5 * np.log(2 * np.pi * np.e * sigma ** 2), abs=0.01)


def test_non_finite_output_signals_divergence():
    net = MlpParams([np.full((2, 1), np.inf)], [np.zeros(2)], "identity")
    with pytest.raises(DivergenceError):
        sample_action(PolicyNet(net), np.ones((1, 1)), SYM, np.random.default_rng(0))


def test_sigma_clamped_for_extreme_outputs():
    for raw in (1e6, -1e6):
        net = MlpParams([np.zeros((2, 1))], [np.array([0.0, raw])], "identity")
        _, log_std, _, _ = policy_forward(PolicyNet(net), np.zeros((3, 1)))
        assert np.all((log_std >= -5.0) & (log_std <= 2.0))


def test_calibration_statistics():
    pol = actor_init([3, 32], 2, init_std=0.15, seed=0)
    bounds = ActionBounds(np.array([-2.0, -1.0]), np.array([2.0, 5.0]))
    s = sample_action(pol, np.zeros((100_000, 3)), bounds, np.random.default_rng(0))
    std = s.pre_tanh.std(axis=0)
    assert np.all((std > 0.97 * 0.15) & (std < 1.03 * 0.15))
    assert np.all(np.abs(s.action.mean(axis=0) - bounds.center) < 0.02 * bounds.half_range)


def test_log_prob_head_gradient():
    rng = np.random.default_rng(4)
    pol = actor_init([3, 6], 2, init_std=0.5, mean_init_std=0.5, seed=rng)
    obs = rng.standard_normal((5, 3))
    x = rng.standard_normal((5, 2))
    up = rng.standard_normal(5)
    g = log_prob_backward(pol, obs, x, up)
    f = lambda: float(np.sum(up * log_prob(pol, obs, x, SYM)))
    assert gradient_check(f, pol.arrays(), g.arrays()) < 1e-4


@st.composite
def policy_and_bounds(draw):
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    d = draw(st.integers(1, 4))
    lo = -rng.uniform(0.01, 5, d)
    hi = rng.uniform(0.01, 5, d)
    pol = actor_init([3, 8], d, init_std=float(np.exp(rng.uniform(-4.5, 1.9))),
                     mean_init_std=float(rng.uniform(0.01, 20)), seed=rng)
    return pol, ActionBounds(lo, hi), rng


@settings(max_examples=60, deadline=None)
@given(policy_and_bounds())
def test_actions_strictly_inside_bounds(args):
    pol, bounds, rng = args
    obs = rng.standard_normal((2000, 3)) * 5
    for dtype in (np.float64, np.float32):
        p = PolicyNet(pol.net.astype(dtype))
        a = sample_action(p, obs.astype(dtype), bounds, rng).action
        assert np.all(a > bounds.a_min.astype(dtype)) and np.all(a < bounds.a_max.astype(dtype))
