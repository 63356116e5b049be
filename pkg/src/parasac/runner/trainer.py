"""The training loop: collect ``N_s`` steps on ``N_e`` envs, then ``G`` gradient updates."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..approximator import AdamState, MlpParams
from ..envs import EnvSpec, load_env_spec, make_env
from ..errors import BufferWarmingUp, CheckpointError, DivergenceError
from ..policy import PolicyNet
from ..replay import NStepWindow, ReplayBuffer, build_corrected_next
from ..sac_core import SacAgent
from . import checkpoint
from .config import RunConfig, build_config
from .normalizer import IdentityNormalizer, ObsNormalizer

log = logging.getLogger(__name__)


@dataclass
class MetricsRecord:
    iteration: int
    env_steps: int
    mean_episode_return: float
    mean_episode_length: float
    critic_loss: float
    actor_loss: float
    alpha: float
    entropy: float
    wall_clock_seconds: float

    def to_json(self) -> str:
        d = {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
             for k, v in asdict(self).items()}
        return json.dumps(d)

    @classmethod
    def from_json(cls, line: str) -> "MetricsRecord":
        d = json.loads(line)
        return cls(**{k: (math.nan if v is None else v) for k, v in d.items()})


def _mean(xs) -> float:
    return float(np.mean(xs)) if len(xs) else math.nan


class Trainer:
    def __init__(self, config: RunConfig):
        self.config = config
        cfg = config.sac
        self.dtype = np.dtype(config.precision)
        overrides = {"num_envs": cfg.num_envs, "dt": config.dt, "horizon": config.horizon}
        self.env_spec: EnvSpec = load_env_spec(config.env, **overrides)
        seeds = np.random.SeedSequence(config.seed).spawn(4)
        env_seed = int(seeds[0].generate_state(1)[0])
        self.env = make_env(self.env_spec, env_seed)
        self.bounds = self.env.bounds
        obs_dim = self.env_spec.obs_dim
        self.agent = SacAgent.create(cfg, obs_dim, self.bounds, seed=seeds[1], dtype=self.dtype)
        self.collect_rng = np.random.default_rng(seeds[2])
        self.update_rng = np.random.default_rng(seeds[3])
        self.buffer = ReplayBuffer(cfg.num_envs, config.capacity_per_env, obs_dim,
                                   self.bounds.dim, dtype=self.dtype)
        norm_cls = ObsNormalizer if config.normalize_obs else IdentityNormalizer
        self.normalizer = norm_cls(obs_dim, clip=config.normalizer_clip)
        self.obs = self.env.reset()
        self.iteration = 0
        self.env_steps = 0
        self.actor_updates = 0
        self.wall_clock = 0.0

    # phases -----------------------------------------------------------------
    def collect(self) -> tuple[list[float], list[int]]:
        """Run ``N_s`` vectorized env steps, storing corrected transitions."""
        for _ in range(self.config.sac.steps_per_env):
            obs_n = self.normalizer.normalize(self.obs, update=True, dtype=self.dtype)
            action = self.agent.act(obs_n, self.collect_rng).action
            res = self.env.step(action)
            next_obs = build_corrected_next(res.obs_post, res.obs_pre, res.timeout)
            self.buffer.push_batch(self.obs, action, res.reward, next_obs, res.done, res.timeout)
            self.obs = res.obs_post
            self.env_steps += self.env.num_envs
        return self.env.pop_episode_stats()

    def _normalized(self, batch: NStepWindow) -> NStepWindow:
        f = lambda x: self.normalizer.normalize(x, update=False, dtype=self.dtype)
        return NStepWindow(f(batch.obs), batch.action, batch.rewards, batch.dones,
                           batch.timeouts, f(batch.next_obs), batch.env_ids, batch.starts)

    def learn(self) -> dict:
        cfg = self.config.sac
        critic, actor, entropy = [], [], []
        for _ in range(cfg.updates_per_iteration):
            try:
                batch = self.buffer.sample_nstep(cfg.batch_size, cfg.n_step, self.update_rng)
            except BufferWarmingUp:
                break
            stats = self.agent.update(self._normalized(batch), self.update_rng)
            critic.append(stats.critic_loss)
            entropy.append(stats.entropy)
            if stats.actor_loss is not None:
                actor.append(stats.actor_loss)
                self.actor_updates += 1
        return {"critic_loss": _mean(critic), "actor_loss": _mean(actor),
                "entropy": _mean(entropy), "updates": len(critic)}

    def run_iteration(self) -> MetricsRecord:
        t0 = time.perf_counter()
        self.iteration += 1
        returns, lengths = self.collect()
        if self.iteration >= self.config.training_start_iteration:
            stats = self.learn()
        else:
            stats = {"critic_loss": math.nan, "actor_loss": math.nan, "entropy": math.nan}
        self.wall_clock += time.perf_counter() - t0
        return MetricsRecord(self.iteration, self.env_steps, _mean(returns), _mean(lengths),
                             stats["critic_loss"], stats["actor_loss"],
                             self.agent.temperature.alpha, stats["entropy"], self.wall_clock)

    # state ------------------------------------------------------------------
    def state_dict(self) -> dict:
        a = self.agent
        return {
            "config": self.config.to_dict(),
            "counters": {"iteration": self.iteration, "env_steps": self.env_steps,
                         "actor_updates": self.actor_updates, "agent_updates": a.updates,
                         "wall_clock": self.wall_clock},
            "policy": {"arrays": a.policy.arrays(), "activation": a.policy.net.activation},
            "actor_optim": _adam_state(a.actor_optim),
            "critics": {"online": [q.arrays() for q in a.critics.online],
                        "target": [q.arrays() for q in a.critics.target],
                        "optims": [_adam_state(o) for o in a.critics.optims]},
            "temperature": {"log_alpha": a.temperature.log_alpha,
                            "optim": None if a.temperature.optim is None
                            else _adam_state(a.temperature.optim)},
            "normalizer": self.normalizer.state_dict(),
            "rngs": {"collect": self.collect_rng.bit_generator.state,
                     "update": self.update_rng.bit_generator.state},
            "env": self.env.state_dict(),
            "obs": self.obs,
            "buffer": self.buffer.state_dict(),
        }

    def load_state_dict(self, state: dict) -> None:
        a = self.agent
        c = state["counters"]
        self.iteration, self.env_steps = int(c["iteration"]), int(c["env_steps"])
        self.actor_updates, a.updates = int(c["actor_updates"]), int(c["agent_updates"])
        self.wall_clock = float(c["wall_clock"])
        a.policy = PolicyNet(a.policy.net.with_arrays(state["policy"]["arrays"]),
                             a.policy.log_std_min, a.policy.log_std_max)
        a.actor_optim = _adam_from(state["actor_optim"])
        cs = state["critics"]
        a.critics.online = [q.with_arrays(arr) for q, arr in zip(a.critics.online, cs["online"])]
        a.critics.target = [q.with_arrays(arr) for q, arr in zip(a.critics.target, cs["target"])]
        a.critics.optims = [_adam_from(o) for o in cs["optims"]]
        t = state["temperature"]
        a.temperature.log_alpha = float(t["log_alpha"])
        a.temperature.optim = None if t["optim"] is None else _adam_from(t["optim"])
        self.normalizer.load_state_dict(state["normalizer"])
        self.collect_rng.bit_generator.state = state["rngs"]["collect"]
        self.update_rng.bit_generator.state = state["rngs"]["update"]
        self.env.load_state_dict(state["env"])
        self.obs = np.asarray(state["obs"]).copy()
        self.buffer.load_state_dict(state["buffer"])

    def save(self, path) -> None:
        checkpoint.save(path, self.state_dict())

    @classmethod
    def load(cls, path, config_overrides: dict | None = None) -> "Trainer":
        state = checkpoint.load(path)
        values = {**state["config"], **(config_overrides or {})}
        try:
            trainer = cls(build_config(values))
            trainer.load_state_dict(state)
        except (KeyError, ValueError, TypeError) as e:
            raise CheckpointError(f"checkpoint does not match this trainer: {e}") from None
        return trainer


def _adam_state(s: AdamState) -> dict:
    return {"lr": s.lr, "m": list(s.m), "v": list(s.v), "t": s.t, "beta1": s.beta1,
            "beta2": s.beta2, "eps": s.eps}


def _adam_from(d: dict) -> AdamState:
    return AdamState(lr=float(d["lr"]), m=list(d["m"]), v=list(d["v"]), t=int(d["t"]),
                     beta1=float(d["beta1"]), beta2=float(d["beta2"]), eps=float(d["eps"]))


def train(config: RunConfig, resume: str | Path | None = None, callback=None,
          trainer: Trainer | None = None):
    """Run the training loop to ``config.max_iterations``.

    Returns ``(trainer, records)``. Metrics are appended to
    ``config.metrics_path`` one JSON object per line when it is set. On
    divergence the most recent checkpoint on disk is left untouched and the
    error propagates.
    """
    if trainer is None:
        trainer = Trainer.load(resume) if resume else Trainer(config)
    records = []
    metrics_file = open(config.metrics_path, "a") if config.metrics_path else None
    try:
        while trainer.iteration < config.max_iterations:
            try:
                rec = trainer.run_iteration()
            except DivergenceError:
                log.error("training diverged at iteration %d", trainer.iteration)
                raise
            records.append(rec)
            if metrics_file:
                metrics_file.write(rec.to_json() + "\n")
                metrics_file.flush()
            if callback:
                callback(trainer, rec)
            every = config.checkpoint_every
            if config.checkpoint_path and every and trainer.iteration % every == 0:
                trainer.save(config.checkpoint_path)
        if config.checkpoint_path:
            trainer.save(config.checkpoint_path)
    finally:
        if metrics_file:
            metrics_file.close()
    return trainer, records
