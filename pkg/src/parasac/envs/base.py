"""Vectorized environment contract with pre-/post-reset observations.

``step`` auto-resets every env that finished. It reports the observation
the env would have shown before that reset (``obs_pre``) alongside the one
after it (``obs_post``), plus separate done and timeout flags, so the
trainer can bootstrap timed-out episodes from the right state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..bounds import ActionBounds, JointSpec, derive_bounds
from ..errors import ConfigError
from .rewards import RewardTermConfig, compute_reward


@dataclass
class EnvSpec:
    name: str
    obs_dim: int
    action_dim: int
    joints: list[JointSpec]
    horizon: int
    dt: float
    num_envs: int = 1
    rewards: list[RewardTermConfig] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        if self.num_envs < 1:
            raise ConfigError("num_envs must be >= 1")
        if len(self.joints) != self.action_dim:
            raise ConfigError(f"{self.name}: {len(self.joints)} joints for action_dim {self.action_dim}")

    def to_dict(self) -> dict:
        return {
            "env": self.name, "num_envs": self.num_envs, "horizon": self.horizon, "dt": self.dt,
            "joints": [{"name": j.name, "default": j.default_pos,
                        "soft_limits": [j.soft_min, j.soft_max],
                        "hard_limits": [j.hard_min, j.hard_max], "scale": j.action_scale}
                       for j in self.joints],
            "rewards": [r.to_dict() for r in self.rewards],
            "params": dict(self.params),
        }


@dataclass
class StepResult:
    obs_post: np.ndarray
    obs_pre: np.ndarray
    reward: np.ndarray
    done: np.ndarray
    timeout: np.ndarray
    terms: dict = field(default_factory=dict)


class VecEnv:
    """Batch of ``num_envs`` independent copies of one environment.

    Subclasses implement ``_reset_envs``, ``_advance`` and ``_observe``.
    Each env owns an RNG stream seeded from ``(seed, env_id)``.
    """

    obs_dim: int = 0

    def __init__(self, spec: EnvSpec, seed: int = 0):
        if spec.obs_dim != self.obs_dim:
            raise ConfigError(f"{spec.name}: obs_dim {spec.obs_dim}, environment provides {self.obs_dim}")
        self.spec = spec
        self.num_envs = spec.num_envs
        self.bounds: ActionBounds = derive_bounds(spec.joints)
        self._scale = np.array([j.action_scale for j in spec.joints])
        self._default = np.array([j.default_pos for j in spec.joints])
        self.seed = seed
        self.rngs = [np.random.default_rng([seed, e]) for e in range(self.num_envs)]
        self.episode_step = np.zeros(self.num_envs, np.int64)
        self.episode_return = np.zeros(self.num_envs)
        self.prev_action = np.zeros((self.num_envs, spec.action_dim))
        self.finished_returns: list[float] = []
        self.finished_lengths: list[int] = []

    # subclass hooks -------------------------------------------------------
    def _reset_envs(self, ids: np.ndarray) -> None:
        raise NotImplementedError

    def _advance(self, targets: np.ndarray, actions: np.ndarray) -> tuple[dict, np.ndarray]:
        """Advance all envs one step; return (reward quantities, failure mask)."""
        raise NotImplementedError

    def _observe(self) -> np.ndarray:
        raise NotImplementedError

    def _state_arrays(self) -> dict:
        return {}

    # public API -------------------------------------------------------------
    def reset(self) -> np.ndarray:
        self.rngs = [np.random.default_rng([self.seed, e]) for e in range(self.num_envs)]
        ids = np.arange(self.num_envs)
        self.episode_step[:] = 0
        self.episode_return[:] = 0
        self.prev_action[:] = 0
        self._reset_envs(ids)
        return self._observe()

    def step(self, actions: np.ndarray) -> StepResult:
        actions = np.asarray(actions, dtype=np.float64)
        if actions.shape != (self.num_envs, self.spec.action_dim):
            raise ConfigError(f"actions shape {actions.shape}, expected "
                              f"({self.num_envs}, {self.spec.action_dim})")
        tol = 1e-6 * (self.bounds.a_max - self.bounds.a_min)
        if np.any(actions < self.bounds.a_min - tol) or np.any(actions > self.bounds.a_max + tol):
            raise ValueError("actions outside policy bounds")
        targets = self._scale * actions + self._default
        quantities, failure = self._advance(targets, actions)
        quantities.setdefault("action", actions)
        quantities.setdefault("prev_action", self.prev_action.copy())
        self.prev_action = actions.copy()
        obs_pre = self._observe()
        # a non-finite state is an env fault and ends the episode as a failure
        failure = np.asarray(failure, bool) | ~np.all(np.isfinite(obs_pre), axis=1)
        self.episode_step += 1
        timeout = (self.episode_step >= self.spec.horizon) & ~failure
        done = failure | timeout
        quantities["failure"] = failure
        reward, terms = compute_reward(self.spec.rewards, quantities)
        reward = np.where(np.isfinite(reward), reward, 0.0)
        self.episode_return += reward
        obs_post = obs_pre.copy()
        ids = np.nonzero(done)[0]
        if ids.size:
            for e in ids:
                self.finished_returns.append(float(self.episode_return[e]))
                self.finished_lengths.append(int(self.episode_step[e]))
            self.episode_step[ids] = 0
            self.episode_return[ids] = 0
            self.prev_action[ids] = 0
            self._reset_envs(ids)
            obs_post[ids] = self._observe()[ids]
        return StepResult(obs_post, obs_pre, reward, done.astype(np.float64),
                          timeout.astype(np.float64), terms)

    def pop_episode_stats(self) -> tuple[list[float], list[int]]:
        out = self.finished_returns, self.finished_lengths
        self.finished_returns, self.finished_lengths = [], []
        return out

    def state_dict(self) -> dict:
        state = {"episode_step": self.episode_step.copy(),
                 "episode_return": self.episode_return.copy(),
                 "prev_action": self.prev_action.copy(),
                 "finished_returns": list(self.finished_returns),
                 "finished_lengths": list(self.finished_lengths),
                 "rngs": [g.bit_generator.state for g in self.rngs]}
        state.update({k: v.copy() for k, v in self._state_arrays().items()})
        return state

    def load_state_dict(self, state: dict) -> None:
        self.episode_step = np.asarray(state["episode_step"], np.int64).copy()
        self.episode_return = np.asarray(state["episode_return"], np.float64).copy()
        self.prev_action = np.asarray(state["prev_action"], np.float64).copy()
        self.finished_returns = list(state["finished_returns"])
        self.finished_lengths = list(state["finished_lengths"])
        for g, s in zip(self.rngs, state["rngs"]):
            g.bit_generator.state = s
        for k in self._state_arrays():
            setattr(self, k, np.asarray(state[k], np.float64).copy())
