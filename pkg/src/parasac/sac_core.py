"""Soft Actor-Critic losses and updates.

All functions take observations that are already network-ready (normalized
by the caller). Critics consume ``concat(obs, action)`` and return a scalar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .approximator import AdamState, MlpParams, adam_step, clip_by_global_norm, mlp_backward, \
    mlp_forward, mlp_init
from .bounds import ActionBounds
from .errors import ConfigError, DivergenceError
from .policy import PolicyNet, actor_init, entropy_estimate, reparam_backward, reparam_forward, \
    sample_action
from .replay import NStepWindow, survival


@dataclass
class SacConfig:
    gamma: float = 0.97
    tau: float = 0.003
    n_step: int = 5
    actor_lr: float = 2e-4
    critic_lr: float = 2e-4
    alpha_lr: float = 2e-5
    batch_size: int = 8192
    updates_per_iteration: int = 200
    policy_update_period: int = 1
    target_entropy_scale: float = 0.167
    init_std: float = 0.15
    init_alpha: float = 0.001
    auto_alpha: bool = True
    max_grad_norm: float = 1.0
    num_envs: int = 8192
    steps_per_env: int = 24
    actor_hidden: tuple = (1024, 512, 256)
    critic_hidden: tuple = (1024, 512, 256)
    activation: str = "silu"
    mean_init_std: float = 0.01
    log_std_min: float = -5.0
    log_std_max: float = 2.0
    num_critics: int = 2
    timeout_bootstrap: bool = True
    train_actor: bool = True
    loss_ceiling: float = 1e6

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0 < self.tau <= 1:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        if self.n_step < 1 or self.policy_update_period < 1:
            raise ConfigError("n_step and policy update period must be >= 1")
        if self.num_critics < 1:
            raise ConfigError("need at least one critic")
        if self.init_alpha < 0 or (self.auto_alpha and self.init_alpha == 0):
            raise ConfigError("initial temperature must be > 0 when tuned automatically")
        if self.batch_size < 1 or self.updates_per_iteration < 0:
            raise ConfigError("batch size must be positive and update count non-negative")
        self.actor_hidden = tuple(int(h) for h in self.actor_hidden)
        self.critic_hidden = tuple(int(h) for h in self.critic_hidden)

    def target_entropy(self, action_dim: int) -> float:
        return -self.target_entropy_scale * action_dim


@dataclass
class CriticEnsemble:
    online: list[MlpParams]
    target: list[MlpParams]
    optims: list[AdamState]
    tau: float

    @classmethod
    def create(cls, obs_dim: int, action_dim: int, hidden: Sequence[int], lr: float, tau: float,
               num: int = 2, activation: str = "silu", seed=0, dtype=np.float64) -> "CriticEnsemble":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        dims = [obs_dim + action_dim, *hidden, 1]
        online = [mlp_init(dims, activation, rng, dtype=dtype) for _ in range(num)]
        target = [q.copy() for q in online]
        optims = [AdamState.for_arrays(q.arrays(), lr) for q in online]
        return cls(online, target, optims, tau)


@dataclass
class Temperature:
    log_alpha: float
    target_entropy: float
    optim: AdamState | None = None   # None means frozen

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha))

    @classmethod
    def create(cls, init_alpha: float, target_entropy: float, lr: float, trainable: bool = True):
        log_alpha = float(np.log(init_alpha)) if init_alpha > 0 else -np.inf
        optim = AdamState.for_arrays([np.zeros(())], lr) if trainable else None
        return cls(log_alpha, target_entropy, optim)


def bootstrap_mask(d: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``b + 1 - d``: 1 for running and timed-out steps, 0 for failures."""
    d = np.asarray(d)
    b = np.asarray(b)
    if np.any(b > d):
        raise ValueError("timeout flag set without done flag")
    return b + 1 - d


def q_values(critics: Sequence[MlpParams], obs: np.ndarray, action: np.ndarray) -> np.ndarray:
    """Stacked critic outputs, shape ``[N, B]``."""
    inp = np.concatenate([obs, action], axis=1)
    return np.stack([mlp_forward(q, inp)[:, 0] for q in critics])


def soft_value(policy: PolicyNet, critics: Sequence[MlpParams], obs: np.ndarray, alpha: float,
               bounds: ActionBounds, rng=None, noise=None) -> np.ndarray:
    """``min_i Q_i(s, a') - alpha * log pi(a'|s)`` with one fresh ``a' ~ pi(.|s)``."""
    sample = sample_action(policy, obs, bounds, rng, noise=noise)
    q = q_values(critics, obs, sample.action).min(axis=0)
    v = q - alpha * sample.log_prob if alpha else q
    if not np.all(np.isfinite(v)):
        raise DivergenceError("non-finite soft value")
    return v


def nstep_targets(windows: NStepWindow, policy: PolicyNet, critics: Sequence[MlpParams],
                  alpha: float, gamma: float, bounds: ActionBounds, rng=None, noise=None,
                  timeout_bootstrap: bool = True) -> np.ndarray:
    """Masked n-step targets for a batch of windows.

    ``noise`` (shape ``[B, n, d]``) fixes the action draws used for every
    bootstrap state; otherwise they come from ``rng``. The soft value is only
    evaluated at states whose bootstrap weight is nonzero. With
    ``timeout_bootstrap=False`` timeouts are treated as failures.
    """
    r = windows.rewards
    d = windows.dones
    b = windows.timeouts if timeout_bootstrap else np.zeros_like(windows.timeouts)
    B, n = r.shape
    s = survival(d)                                  # [B, n+1]
    disc = gamma ** np.arange(n + 1, dtype=np.float64)
    ret = (disc[:n] * s[:, :n] * r).sum(axis=1)
    weight = disc[1:] * s[:, :n] * b                 # timeout bootstraps
    weight[:, n - 1] += disc[n] * s[:, n]            # tail bootstrap
    rows, cols = np.nonzero(weight)
    if rows.size:
        eps = None if noise is None else noise[rows, cols]
        v = soft_value(policy, critics, windows.next_obs[rows, cols], alpha, bounds, rng, eps)
        ret = ret + np.bincount(rows, weights=weight[rows, cols] * v, minlength=B)
    return ret.astype(r.dtype, copy=False)


def critic_loss_and_grads(critics: Sequence[MlpParams], obs: np.ndarray, action: np.ndarray,
                          y: np.ndarray):
    """Mean over the ensemble of per-critic MSE, and the gradient for each critic."""
    inp = np.concatenate([obs, action], axis=1)
    n, bsz = len(critics), inp.shape[0]
    loss = 0.0
    grads = []
    for q in critics:
        out, cache = mlp_forward(q, inp, return_cache=True)
        err = out[:, 0] - y
        loss += float(np.mean(np.square(err, dtype=np.float64))) / n
        up = (2.0 / (n * bsz)) * err[:, None]
        g, _ = mlp_backward(q, inp, up.astype(out.dtype, copy=False), cache)
        grads.append(g.arrays())
    return loss, grads


def critic_update(ens: CriticEnsemble, obs: np.ndarray, action: np.ndarray, y: np.ndarray,
                  max_grad_norm: float | None = 1.0, loss_ceiling: float = 1e6) -> float:
    """One Adam step per online critic toward fixed targets ``y``; returns the pre-step loss."""
    loss, grads = critic_loss_and_grads(ens.online, obs, action, y)
    if not np.isfinite(loss) or loss > loss_ceiling:
        raise DivergenceError(f"critic loss {loss:.4g} exceeds ceiling {loss_ceiling:.4g}")
    for i, (q, g) in enumerate(zip(ens.online, grads)):
        new, ens.optims[i] = adam_step(q.arrays(), g, ens.optims[i], max_grad_norm)
        ens.online[i] = q.with_arrays(new)
    return loss


def actor_loss_and_grads(policy: PolicyNet, critics: Sequence[MlpParams], obs: np.ndarray,
                         alpha: float, bounds: ActionBounds, noise: np.ndarray, forward=None):
    """``mean(alpha * log pi(a|s) - min_i Q_i(s, a))`` with ``a`` reparameterized by ``noise``.

    Returns ``(loss, grads, log_probs)``. Critic parameters are only read.
    ``forward`` lets a caller reuse an earlier :func:`reparam_forward` result.
    """
    sample, ctx = forward if forward is not None else reparam_forward(policy, obs, bounds, noise)
    bsz, d = sample.action.shape
    inp = np.concatenate([obs, sample.action], axis=1)
    outs, caches = [], []
    for q in critics:
        o, c = mlp_forward(q, inp, return_cache=True)
        outs.append(o[:, 0])
        caches.append(c)
    qs = np.stack(outs)
    pick = np.argmin(qs, axis=0)
    qmin = qs[pick, np.arange(bsz)]
    loss = float(np.mean(alpha * sample.log_prob - qmin)) if alpha else float(-np.mean(qmin))
    d_action = np.zeros_like(sample.action)
    for i, q in enumerate(critics):
        sel = pick == i
        if not sel.any():
            continue
        up = np.where(sel, -1.0 / bsz, 0.0).astype(inp.dtype)[:, None]
        _, d_inp = mlp_backward(q, inp, up, caches[i])
        d_action += d_inp[:, -d:]
    d_lp = np.full(bsz, alpha / bsz, dtype=sample.log_prob.dtype)
    grads = reparam_backward(policy, obs, bounds, ctx, d_action, d_lp)
    return loss, grads.arrays(), sample.log_prob


def actor_update(policy: PolicyNet, optim: AdamState, critics: Sequence[MlpParams],
                 obs: np.ndarray, alpha: float, bounds: ActionBounds, rng=None, noise=None,
                 max_grad_norm: float | None = 1.0, forward=None):
    """One Adam step on the actor loss. Returns ``(policy, optim, loss, log_probs)``."""
    if noise is None and forward is None:
        noise = rng.standard_normal((obs.shape[0], policy.action_dim)).astype(obs.dtype)
    loss, grads, log_probs = actor_loss_and_grads(policy, critics, obs, alpha, bounds, noise,
                                                  forward)
    if not np.isfinite(loss):
        raise DivergenceError("non-finite actor loss")
    new, optim = adam_step(policy.arrays(), grads, optim, max_grad_norm)
    return policy.with_arrays(new), optim, loss, log_probs


def temperature_loss(log_alpha: float, log_probs: np.ndarray, target_entropy: float):
    """Loss ``-log_alpha * mean(log pi + H_target)`` and its gradient in ``log_alpha``."""
    gap = float(np.mean(log_probs, dtype=np.float64)) + target_entropy
    return -log_alpha * gap, -gap


def temperature_update(temp: Temperature, log_probs: np.ndarray) -> float:
    """One Adam step on ``log_alpha``; a no-op for a frozen temperature."""
    if len(log_probs) == 0:
        raise ValueError("temperature update needs a non-empty batch")
    if temp.optim is None:
        return 0.0
    loss, grad = temperature_loss(temp.log_alpha, log_probs, temp.target_entropy)
    new, temp.optim = adam_step([np.array(temp.log_alpha)], [np.array(grad)], temp.optim)
    temp.log_alpha = float(new[0])
    return loss


def soft_update(ens: CriticEnsemble, tau: float | None = None) -> None:
    tau = ens.tau if tau is None else tau
    if not 0 < tau <= 1:
        raise ConfigError(f"tau must lie in (0, 1], got {tau}")
    for i, (q, qt) in enumerate(zip(ens.online, ens.target)):
        ens.target[i] = qt.with_arrays([(tau * a + (1 - tau) * t).astype(t.dtype, copy=False)
                                        for a, t in zip(q.arrays(), qt.arrays())])


@dataclass
class UpdateStats:
    critic_loss: float
    actor_loss: float | None
    alpha: float
    entropy: float


@dataclass
class SacAgent:
    """Policy, critics, temperature and their optimizers."""
    config: SacConfig
    bounds: ActionBounds
    policy: PolicyNet
    actor_optim: AdamState
    critics: CriticEnsemble
    temperature: Temperature
    updates: int = 0
    dtype: np.dtype = field(default=np.dtype(np.float64))

    @classmethod
    def create(cls, config: SacConfig, obs_dim: int, bounds: ActionBounds, seed=0,
               dtype=np.float64) -> "SacAgent":
        rng = np.random.default_rng(seed)
        d = bounds.dim
        policy = actor_init([obs_dim, *config.actor_hidden], d, config.init_std,
                            config.mean_init_std, rng, config.activation, config.log_std_min,
                            config.log_std_max, dtype=dtype)
        critics = CriticEnsemble.create(obs_dim, d, config.critic_hidden, config.critic_lr,
                                        config.tau, config.num_critics, config.activation, rng,
                                        dtype=dtype)
        temp = Temperature.create(config.init_alpha, config.target_entropy(d), config.alpha_lr,
                                  trainable=config.auto_alpha)
        return cls(config, bounds, policy, AdamState.for_arrays(policy.arrays(), config.actor_lr),
                   critics, temp, dtype=np.dtype(dtype))

    def act(self, obs: np.ndarray, rng=None, deterministic: bool = False):
        return sample_action(self.policy, obs.astype(self.dtype, copy=False), self.bounds, rng,
                             deterministic=deterministic)

    def update(self, batch: NStepWindow, rng: np.random.Generator) -> UpdateStats:
        """One gradient step: critics, temperature, actor (every p steps), targets.

        ``batch`` must already hold normalized observations.
        """
        cfg = self.config
        alpha = self.temperature.alpha
        y = nstep_targets(batch, self.policy, self.critics.target, alpha, cfg.gamma, self.bounds,
                          rng, timeout_bootstrap=cfg.timeout_bootstrap)
        critic_loss = critic_update(self.critics, batch.obs, batch.action, y, cfg.max_grad_norm,
                                    cfg.loss_ceiling)
        noise = rng.standard_normal((len(batch), self.bounds.dim)).astype(self.dtype)
        fwd = reparam_forward(self.policy, batch.obs, self.bounds, noise)
        log_probs = fwd[0].log_prob
        temperature_update(self.temperature, log_probs)
        actor_loss = None
        if cfg.train_actor and self.updates % cfg.policy_update_period == 0:
            self.policy, self.actor_optim, actor_loss, _ = actor_update(
                self.policy, self.actor_optim, self.critics.online, batch.obs,
                self.temperature.alpha, self.bounds, forward=fwd, max_grad_norm=cfg.max_grad_norm)
        soft_update(self.critics)
        self.updates += 1
        return UpdateStats(critic_loss, actor_loss, self.temperature.alpha,
                           entropy_estimate(log_probs))
