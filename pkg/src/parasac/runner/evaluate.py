"""Deterministic policy evaluation on a fresh batch of episodes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..envs import make_env
from ..sac_core import SacAgent
from .normalizer import ObsNormalizer


@dataclass
class EvalReport:
    episodes: int
    mean_return: float
    mean_length: float
    term_means: dict = field(default_factory=dict)   # per-step mean of each reward term
    hold_return: float | None = None                 # mean over episodes of the last-window return
    failures: int = 0

    def to_dict(self) -> dict:
        return {"episodes": self.episodes, "mean_return": self.mean_return,
                "mean_length": self.mean_length, "term_means": dict(self.term_means),
                "hold_return": self.hold_return, "failures": self.failures}


def evaluate(agent: SacAgent, normalizer: ObsNormalizer, env_spec, episodes: int = 16,
             seed: int = 10_000, hold_window: int | None = None) -> EvalReport:
    """Run ``episodes`` episodes in parallel with the squashed-mean action.

    Every env plays exactly one episode; steps after an env's first done are
    ignored. ``hold_window`` sums each episode's reward over its last that
    many steps. Normalizer statistics are read, never updated.
    """
    if episodes < 1:
        raise ValueError("need at least one evaluation episode")
    spec = type(env_spec)(**{**env_spec.__dict__, "num_envs": episodes})
    env = make_env(spec, seed)
    obs = env.reset()
    H = spec.horizon
    alive = np.ones(episodes, bool)
    lengths = np.zeros(episodes, np.int64)
    rewards = np.zeros((episodes, H))
    term_sums: dict[str, float] = {}
    failures = 0
    for t in range(H):
        obs_n = normalizer.normalize(obs, update=False, dtype=agent.dtype)
        res = env.step(agent.act(obs_n, deterministic=True).action)
        rewards[alive, t] = res.reward[alive]
        for k, v in res.terms.items():
            term_sums[k] = term_sums.get(k, 0.0) + float(np.sum(np.asarray(v)[alive]))
        lengths += alive
        failures += int(np.sum(alive & (res.done > 0) & (res.timeout == 0)))
        alive &= res.done == 0
        obs = res.obs_post
        if not alive.any():
            break
    total_steps = int(lengths.sum())
    hold = None
    if hold_window:
        hold = float(np.mean([rewards[e, max(0, lengths[e] - hold_window):lengths[e]].sum()
                              for e in range(episodes)]))
    return EvalReport(episodes, float(rewards.sum(axis=1).mean()), float(lengths.mean()),
                      {k: v / total_steps for k, v in term_sums.items()}, hold, failures)
