import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parasac.approximator import ACTIVATIONS, AdamState, MlpParams, adam_step, \
    clip_by_global_norm, global_norm, gradient_check, mlp_backward, mlp_forward, mlp_init
from parasac.errors import ConfigError, DivergenceError


def test_init_deterministic_and_zero_bias():
    a = mlp_init([3, 1], seed=7)
    b = mlp_init([3, 1], seed=7)
    for x, y in zip(a.arrays(), b.arrays()):
        np.testing.assert_array_equal(x, y)
    np.testing.assert_array_equal(a.biases[0], [0.0])


def test_init_within_fan_in_bound():
    net = mlp_init([4, 8, 2], seed=1)
    for w in net.weights:
        assert np.all(np.abs(w) <= np.sqrt(6.0 / w.shape[1]))


@pytest.mark.parametrize("dims", [[], [3], [3, 0], [-1, 2]])
def test_init_rejects_bad_dims(dims):
    with pytest.raises(ConfigError):
        mlp_init(dims)


def test_params_reject_broken_chain():
    with pytest.raises(ConfigError):
        MlpParams([np.zeros((4, 3)), np.zeros((2, 5))], [np.zeros(4), np.zeros(2)])


def test_zero_net_gives_zero_output():
    net = mlp_init([3, 5, 2], seed=0)
    net = net.with_arrays([np.zeros_like(a) for a in net.arrays()])
    x = np.random.default_rng(0).standard_normal((4, 3))
    np.testing.assert_array_equal(mlp_forward(net, x), np.zeros((4, 2)))


def test_identity_net_passes_input():
    net = MlpParams([np.eye(3)], [np.zeros(3)], "identity")
    x = np.random.default_rng(0).standard_normal((5, 3))
    np.testing.assert_array_equal(mlp_forward(net, x), x)


def test_forward_matches_hand_matmul():
    rng = np.random.default_rng(3)
    net = mlp_init([3, 4, 2], "tanh", seed=rng)
    net.biases[0][:] = rng.standard_normal(4)
    x = rng.standard_normal((6, 3))
    h = np.tanh(np.einsum("oi,bi->bo", net.weights[0], x) + net.biases[0])
    ref = np.einsum("oi,bi->bo", net.weights[1], h) + net.biases[1]
    np.testing.assert_allclose(mlp_forward(net, x), ref, rtol=1e-12, atol=1e-12)


def test_forward_rejects_width_mismatch():
    with pytest.raises(ConfigError):
        mlp_forward(mlp_init([3, 2]), np.zeros((1, 4)))


def test_backward_zero_upstream_gives_zero_grads():
    net = mlp_init([3, 4, 2], seed=0)
    x = np.ones((2, 3))
    g, dx = mlp_backward(net, x, np.zeros((2, 2)))
    assert all(np.all(a == 0) for a in g.arrays())
    assert np.all(dx == 0)


def test_linear_net_weight_grad_closed_form():
    rng = np.random.default_rng(0)
    net = mlp_init([3, 2], seed=rng)
    x = rng.standard_normal((5, 3))
    up = rng.standard_normal((5, 2))
    g, _ = mlp_backward(net, x, up)
    np.testing.assert_allclose(g.weights[0], up.T @ x)
    np.testing.assert_allclose(g.biases[0], up.sum(axis=0))


@pytest.mark.parametrize("act", ACTIVATIONS)
def test_backward_matches_finite_differences(act):
    rng = np.random.default_rng(11)
    net = mlp_init([4, 6, 5, 2], act, seed=rng)
    for b in net.biases:
        b += rng.uniform(-0.5, 0.5, b.shape)
    x = rng.standard_normal((3, 4))
    up = rng.standard_normal((3, 2))
    g, dx = mlp_backward(net, x, up)
    f = lambda: float(np.sum(up * mlp_forward(net, x)))
    assert gradient_check(f, net.arrays(), g.arrays()) < 1e-4
    assert gradient_check(f, [x], [dx]) < 1e-4


def test_silu_is_stable_for_large_inputs():
    net = MlpParams([np.ones((1, 1)), np.ones((1, 1))], [np.zeros(1), np.zeros(1)], "silu")
    out = mlp_forward(net, np.array([[-1e4], [1e4]]))
    np.testing.assert_allclose(out[:, 0], [0.0, 1e4])


def test_adam_zero_grad_leaves_params():
    p = [np.array([1.0, -2.0])]
    new, st_ = adam_step(p, [np.zeros(2)], AdamState.for_arrays(p, 0.1))
    np.testing.assert_array_equal(new[0], p[0])
    assert st_.t == 1


def test_adam_first_step_magnitude_is_lr():
    p = [np.array(0.0)]
    new, _ = adam_step(p, [np.array(1.0)], AdamState.for_arrays(p, 0.1))
    assert abs(float(new[0]) + 0.1) < 1e-6


def test_adam_is_functional():
    p = [np.array([1.0])]
    state = AdamState.for_arrays(p, 0.1)
    adam_step(p, [np.array([1.0])], state)
    assert state.t == 0 and p[0][0] == 1.0


def test_clip_scales_by_ratio():
    g = [np.array([6.0, 8.0])]
    clipped, norm = clip_by_global_norm(g, 1.0)
    assert norm == pytest.approx(10.0)
    np.testing.assert_allclose(clipped[0], [0.6, 0.8])


def test_non_finite_gradient_signals_divergence():
    with pytest.raises(DivergenceError):
        clip_by_global_norm([np.array([np.nan])], 1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=12), st.floats(0.01, 10))
def test_clipping_preserves_direction(values, cap):
    g = [np.array(values)]
    clipped, norm = clip_by_global_norm(g, cap)
    assert global_norm(clipped) <= cap * (1 + 1e-9) or norm <= cap
    if norm > cap:
        np.testing.assert_allclose(clipped[0] * (norm / cap), g[0], rtol=1e-9, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_forward_deterministic(seed):
    net = mlp_init([3, 7, 2], seed=seed)
    x = np.random.default_rng(seed).standard_normal((4, 3))
    np.testing.assert_array_equal(mlp_forward(net, x), mlp_forward(net, x))
