"""Per-environment ring buffers with on-the-fly n-step windows.

Every environment writes into its own ring, so ``n`` temporally adjacent
transitions of one env are recovered by index arithmetic. Windows may run
past an episode end; the survival mask in the target computation takes care
of that, so nothing is zero-padded at write time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BufferWarmingUp, ConfigError


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: float
    timeout: float

    def __post_init__(self):
        if self.timeout > self.done:
            raise ValueError("timeout flag set without done flag")
        for name in ("obs", "action", "next_obs"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite {name}")
        if not np.isfinite(self.reward):
            raise ValueError("non-finite reward")


@dataclass
class NStepWindow:
    """A batch of windows (leading batch axis) or a single window.

    ``rewards``, ``dones`` and ``timeouts`` have length ``n`` on their last
    axis; ``next_obs[..., k, :]`` is the corrected successor of step ``t + k``.
    """
    obs: np.ndarray
    action: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    timeouts: np.ndarray
    next_obs: np.ndarray
    env_ids: np.ndarray | None = None
    starts: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.rewards.shape[-1]

    def __len__(self) -> int:
        return self.rewards.shape[0]

    def __getitem__(self, i) -> "NStepWindow":
        return NStepWindow(self.obs[i], self.action[i], self.rewards[i], self.dones[i],
                           self.timeouts[i], self.next_obs[i])


def build_corrected_next(s_post: np.ndarray, s_pre: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pre-reset observation where ``b == 1``, post-reset observation elsewhere."""
    s_post = np.asarray(s_post)
    s_pre = np.asarray(s_pre)
    if s_post.shape != s_pre.shape:
        raise ConfigError(f"observation shapes differ: {s_post.shape} vs {s_pre.shape}")
    mask = np.asarray(b) > 0
    if s_post.ndim > mask.ndim:
        mask = mask[..., None]
    return np.where(mask, s_pre, s_post)


class ReplayBuffer:
    def __init__(self, num_envs: int, capacity: int, obs_dim: int, action_dim: int,
                 dtype=np.float32):
        if num_envs <= 0 or capacity <= 0:
            raise ConfigError("num_envs and capacity must be positive")
        self.num_envs = num_envs
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.dtype = np.dtype(dtype)
        shape = (num_envs, capacity)
        self.obs = np.zeros(shape + (obs_dim,), self.dtype)
        self.action = np.zeros(shape + (action_dim,), self.dtype)
        self.reward = np.zeros(shape, self.dtype)
        self.next_obs = np.zeros(shape + (obs_dim,), self.dtype)
        self.done = np.zeros(shape, np.uint8)
        self.timeout = np.zeros(shape, np.uint8)
        self.head = np.zeros(num_envs, np.int64)   # next write slot
        self.fill = np.zeros(num_envs, np.int64)

    def __len__(self) -> int:
        return int(self.fill.sum())

    def push(self, env_id: int, t: Transition) -> None:
        if not 0 <= env_id < self.num_envs:
            raise IndexError(f"env_id {env_id} out of range")
        if t.timeout > t.done:
            raise ValueError("timeout flag set without done flag")
        i = self.head[env_id]
        self.obs[env_id, i] = t.obs
        self.action[env_id, i] = t.action
        self.reward[env_id, i] = t.reward
        self.next_obs[env_id, i] = t.next_obs
        self.done[env_id, i] = t.done
        self.timeout[env_id, i] = t.timeout
        self.head[env_id] = (i + 1) % self.capacity
        self.fill[env_id] = min(self.fill[env_id] + 1, self.capacity)

    def push_batch(self, obs, action, reward, next_obs, done, timeout) -> None:
        """Store one step for every env at once (row ``e`` goes to env ``e``)."""
        done = np.asarray(done)
        timeout = np.asarray(timeout)
        if np.any(timeout > done):
            raise ValueError("timeout flag set without done flag")
        rows = np.arange(self.num_envs)
        i = self.head
        self.obs[rows, i] = obs
        self.action[rows, i] = action
        self.reward[rows, i] = reward
        self.next_obs[rows, i] = next_obs
        self.done[rows, i] = done
        self.timeout[rows, i] = timeout
        self.head = (self.head + 1) % self.capacity
        self.fill = np.minimum(self.fill + 1, self.capacity)

    def window_counts(self, n: int) -> np.ndarray:
        return np.maximum(self.fill - n + 1, 0)

    def ready(self, n: int) -> bool:
        return bool(self.window_counts(n).sum() > 0)

    def window_indices(self, env_ids: np.ndarray, offsets: np.ndarray, n: int) -> np.ndarray:
        """Physical slots ``[B, n]`` of windows starting ``offsets`` steps after each env's oldest entry."""
        oldest = self.head[env_ids] - self.fill[env_ids]
        start = oldest + offsets
        return (start[:, None] + np.arange(n)[None, :]) % self.capacity

    def sample_nstep(self, batch_size: int, n: int, rng: np.random.Generator) -> NStepWindow:
        """Sample windows uniformly over all complete windows of all envs."""
        if n < 1:
            raise ConfigError("n must be >= 1")
        if n > self.capacity:
            raise ConfigError("n exceeds ring capacity")
        counts = self.window_counts(n)
        total = int(counts.sum())
        if total == 0:
            raise BufferWarmingUp(f"no env holds {n} contiguous transitions yet")
        cum = np.cumsum(counts)
        u = rng.integers(0, total, size=batch_size)
        env_ids = np.searchsorted(cum, u, side="right")
        offsets = u - (cum[env_ids] - counts[env_ids])
        idx = self.window_indices(env_ids, offsets, n)
        e = env_ids[:, None]
        first = idx[:, 0]
        return NStepWindow(
            obs=self.obs[env_ids, first],
            action=self.action[env_ids, first],
            rewards=self.reward[e, idx],
            dones=self.done[e, idx].astype(self.dtype),
            timeouts=self.timeout[e, idx].astype(self.dtype),
            next_obs=self.next_obs[e, idx],
            env_ids=env_ids,
            starts=offsets,
        )

    _FIELDS = ("obs", "action", "reward", "next_obs", "done", "timeout", "head", "fill")

    def state_dict(self) -> dict:
        return {k: getattr(self, k) for k in self._FIELDS}

    def load_state_dict(self, state: dict) -> None:
        for k in self._FIELDS:
            cur = getattr(self, k)
            arr = np.asarray(state[k])
            if arr.shape != cur.shape:
                raise ConfigError(f"buffer field {k}: shape {arr.shape} != {cur.shape}")
            setattr(self, k, arr.astype(cur.dtype, copy=True))


def survival(dones: np.ndarray) -> np.ndarray:
    """``S_k = prod_{j<k} (1 - d_j)`` for ``k = 0..n`` along the last axis."""
    alive = np.cumprod(1 - dones, axis=-1)
    ones = np.ones(dones.shape[:-1] + (1,), dtype=alive.dtype)
    return np.concatenate([ones, alive], axis=-1)


def oracle_nstep_target(window: NStepWindow, value: Callable[[np.ndarray], float],
                        gamma: float, n: int) -> float:
    """Reference n-step target for a single window, by plain loops.

    Deliberately unvectorized; the batched version in ``sac_core`` is tested
    against this.
    """
    r = [float(x) for x in window.rewards]
    d = [float(x) for x in window.dones]
    b = [float(x) for x in window.timeouts]

    def s(k):
        out = 1.0
        for j in range(k):
            out *= 1.0 - d[j]
        return out

    total = 0.0
    for k in range(n):
        total += gamma ** k * s(k) * r[k]
    if s(n):
        total += gamma ** n * s(n) * value(window.next_obs[n - 1])
    for k in range(n):
        if s(k) * b[k]:
            total += gamma ** (k + 1) * s(k) * b[k] * value(window.next_obs[k])
    return total
