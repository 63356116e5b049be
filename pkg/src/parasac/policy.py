"""Bounded squashed-Gaussian actor.

The network maps an observation to ``2d`` outputs split into a mean and a
raw log-std. Samples are ``x = mu + sigma * eps`` and actions are
``b + c * tanh(x)``, where ``b`` and ``c`` are the center and half-range of
the action bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .approximator import GradBundle, MlpParams, mlp_backward, mlp_forward, mlp_init
from .bounds import ActionBounds
from .errors import ConfigError, DivergenceError

LOG_2PI = float(np.log(2 * np.pi))
LOG_2 = float(np.log(2.0))


@dataclass
class PolicyNet:
    net: MlpParams
    log_std_min: float = -5.0
    log_std_max: float = 2.0

    @property
    def action_dim(self) -> int:
        return self.net.out_dim // 2

    @property
    def obs_dim(self) -> int:
        return self.net.in_dim

    # head views; these alias the last layer of ``net``
    @property
    def mean_weight(self) -> np.ndarray:
        return self.net.weights[-1][: self.action_dim]

    @property
    def mean_bias(self) -> np.ndarray:
        return self.net.biases[-1][: self.action_dim]

    @property
    def log_std_weight(self) -> np.ndarray:
        return self.net.weights[-1][self.action_dim:]

    @property
    def log_std_bias(self) -> np.ndarray:
        return self.net.biases[-1][self.action_dim:]

    def arrays(self) -> list[np.ndarray]:
        return self.net.arrays()

    def with_arrays(self, arrays) -> "PolicyNet":
        return PolicyNet(self.net.with_arrays(arrays), self.log_std_min, self.log_std_max)

    def copy(self) -> "PolicyNet":
        return PolicyNet(self.net.copy(), self.log_std_min, self.log_std_max)


@dataclass
class SquashedSample:
    pre_tanh: np.ndarray
    action: np.ndarray
    log_prob: np.ndarray | None
    noise: np.ndarray | None


def actor_init(trunk_dims, action_dim: int, init_std: float = 0.15, mean_init_std: float = 0.01,
               seed=0, activation: str = "silu", log_std_min: float = -5.0,
               log_std_max: float = 2.0, dtype=np.float64) -> PolicyNet:
    """Build a policy whose initial actions sit at the bounds center with std ``init_std``.

    ``trunk_dims`` is ``[obs_dim, *hidden]``. The trunk uses the default
    fan-in initialization. The mean head gets ``N(0, mean_init_std**2)``
    weights and zero bias; the log-std head gets zero weights and a constant
    ``log(init_std)`` bias, so the initial std does not depend on the state.
    """
    if not (np.exp(log_std_min) < init_std < np.exp(log_std_max)):
        raise ConfigError(f"initial std {init_std} outside clamp range "
                          f"({np.exp(log_std_min):.4g}, {np.exp(log_std_max):.4g})")
    if not mean_init_std > 0:
        raise ConfigError("mean_init_std must be > 0")
    if action_dim <= 0:
        raise ConfigError("action_dim must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    trunk_dims = list(trunk_dims)
    net = mlp_init(trunk_dims + [2 * action_dim], activation, rng, dtype=dtype)
    d_h = trunk_dims[-1]
    w = np.zeros((2 * action_dim, d_h), dtype=dtype)
    w[:action_dim] = rng.normal(0.0, mean_init_std, size=(action_dim, d_h))
    bias = np.zeros(2 * action_dim, dtype=dtype)
    bias[action_dim:] = np.log(init_std)
    net.weights[-1] = w
    net.biases[-1] = bias
    return PolicyNet(net, log_std_min, log_std_max)


def policy_forward(policy: PolicyNet, obs: np.ndarray):
    """Returns ``(mu, log_std, raw_log_std, cache)`` with log-std clamped."""
    out, cache = mlp_forward(policy.net, obs, return_cache=True)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("policy produced non-finite outputs")
    d = policy.action_dim
    mu, raw = out[:, :d], out[:, d:]
    log_std = np.clip(raw, policy.log_std_min, policy.log_std_max)
    return mu, log_std, raw, cache


def log_one_minus_tanh_sq(x: np.ndarray) -> np.ndarray:
    """``log(1 - tanh(x)**2)`` evaluated without cancellation."""
    return 2.0 * (LOG_2 - x - np.logaddexp(0.0, -2.0 * x))


def squash(x: np.ndarray, bounds: ActionBounds) -> np.ndarray:
    b = bounds.center.astype(x.dtype)
    c = bounds.half_range.astype(x.dtype)
    a = b + c * np.tanh(x)
    # tanh saturates to exactly +-1 in finite precision
    lo = np.nextafter(bounds.a_min.astype(x.dtype), np.inf)
    hi = np.nextafter(bounds.a_max.astype(x.dtype), -np.inf)
    return np.clip(a, lo, hi)


def _log_prob_terms(x, mu, log_std, bounds: ActionBounds):
    sigma = np.exp(log_std)
    z = (x - mu) / sigma
    gauss = -0.5 * z * z - log_std - 0.5 * LOG_2PI
    return (gauss.sum(axis=-1) - log_one_minus_tanh_sq(x).sum(axis=-1)
            - float(np.log(bounds.half_range).sum()))


def sample_action(policy: PolicyNet, obs: np.ndarray, bounds: ActionBounds, rng=None,
                  deterministic: bool = False, noise: np.ndarray | None = None) -> SquashedSample:
    """Draw reparameterized actions for a batch of observations.

    ``noise`` overrides the standard-normal draw (used to freeze samples in
    gradient checks and oracle comparisons). Deterministic mode returns the
    squashed mean and no log-probability.
    """
    mu, log_std, _, _ = policy_forward(policy, obs)
    if deterministic:
        return SquashedSample(mu, squash(mu, bounds), None, None)
    if noise is None:
        noise = rng.standard_normal(mu.shape).astype(mu.dtype)
    x = mu + np.exp(log_std) * noise
    return SquashedSample(x, squash(x, bounds), _log_prob_terms(x, mu, log_std, bounds), noise)


def log_prob(policy: PolicyNet, obs: np.ndarray, pre_tanh: np.ndarray,
             bounds: ActionBounds) -> np.ndarray:
    """Log-density of the squashed action ``b + c * tanh(pre_tanh)``."""
    mu, log_std, _, _ = policy_forward(policy, obs)
    if pre_tanh.shape != mu.shape:
        raise ConfigError(f"pre_tanh shape {pre_tanh.shape} != {mu.shape}")
    return _log_prob_terms(pre_tanh, mu, log_std, bounds)


def log_prob_backward(policy: PolicyNet, obs: np.ndarray, pre_tanh: np.ndarray,
                      upstream: np.ndarray) -> GradBundle:
    """Parameter gradient of ``sum(upstream * log_prob)`` at fixed ``pre_tanh``."""
    mu, log_std, raw, cache = policy_forward(policy, obs)
    inv_var = np.exp(-2 * log_std)
    diff = pre_tanh - mu
    u = upstream[:, None]
    d_mu = u * diff * inv_var
    d_log_std = u * (diff * diff * inv_var - 1.0)
    d_raw = d_log_std * ((raw >= policy.log_std_min) & (raw <= policy.log_std_max))
    grads, _ = mlp_backward(policy.net, obs, np.concatenate([d_mu, d_raw], axis=1), cache)
    return grads


def reparam_forward(policy: PolicyNet, obs: np.ndarray, bounds: ActionBounds, noise: np.ndarray):
    """Sample with fixed noise and keep what :func:`reparam_backward` needs."""
    mu, log_std, raw, cache = policy_forward(policy, obs)
    sigma = np.exp(log_std)
    x = mu + sigma * noise
    sample = SquashedSample(x, squash(x, bounds), _log_prob_terms(x, mu, log_std, bounds), noise)
    return sample, (sigma, raw, cache, np.tanh(x), noise)


def reparam_backward(policy: PolicyNet, obs: np.ndarray, bounds: ActionBounds, ctx,
                     d_action: np.ndarray, d_log_prob: np.ndarray) -> GradBundle:
    """Parameter gradient of ``sum(d_action * a) + sum(d_log_prob * log_prob)``.

    The noise is held fixed, so ``a`` and ``log_prob`` depend on the network
    only through ``x = mu + sigma * eps``. With fixed noise the Gaussian term
    of the log-density reduces to ``-0.5 eps^2 - log sigma``.
    """
    sigma, raw, cache, t, eps = ctx
    c = bounds.half_range.astype(t.dtype)
    g_lp = d_log_prob[:, None]
    d_x = d_action * c * (1 - t * t) + g_lp * 2 * t
    d_mu = d_x
    d_log_std = d_x * sigma * eps - g_lp
    d_raw = d_log_std * ((raw >= policy.log_std_min) & (raw <= policy.log_std_max))
    grads, _ = mlp_backward(policy.net, obs, np.concatenate([d_mu, d_raw], axis=1), cache)
    return grads


def entropy_estimate(log_probs: np.ndarray) -> float:
    log_probs = np.asarray(log_probs)
    if log_probs.size == 0:
        raise ValueError("entropy estimate needs at least one sample")
    return float(-np.mean(log_probs))
