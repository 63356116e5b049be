"""Run configuration: profiles, YAML loading and the hyperparameter key table.

Config files are flat YAML mappings. Hyperparameters use their table names
(``"discount factor"``, ``"mini-batch size"``, ...); everything else uses
the extra keys listed in ``EXTRA_KEYS``. A file is layered on top of a
profile (``desk`` or ``paper``), and explicit overrides on top of that.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..envs import resolve_config_path
from ..errors import ConfigError
from ..sac_core import SacConfig

# table name -> SacConfig attribute
SAC_KEYS = {
    "environments": "num_envs",
    "rollout steps per environment": "steps_per_env",
    "mini-batch size": "batch_size",
    "actor learning rate": "actor_lr",
    "critic learning rate": "critic_lr",
    "temperature learning rate": "alpha_lr",
    "discount factor": "gamma",
    "target smoothing coefficient": "tau",
    "initial temperature": "init_alpha",
    "automatic temperature tuning": "auto_alpha",
    "target entropy scale": "target_entropy_scale",
    "max gradient norm": "max_grad_norm",
    "policy update frequency": "policy_update_period",
    "multi-step return horizon": "n_step",
    "actor hidden dimensions": "actor_hidden",
    "critic hidden dimensions": "critic_hidden",
    "activation": "activation",
    "initial action noise std": "init_std",
}

# table keys handled by the runner rather than SacConfig
RUN_TABLE_KEYS = (
    "step time seconds", "max iterations", "training start iteration", "replay buffer size",
    "learning epochs", "mini-batches", "actor observation normalization",
    "critic observation normalization", "layer normalization",
)

EXTRA_KEYS = {
    "env": "environment name or description file",
    "seed": "base random seed",
    "precision": "float32 or float64",
    "timeout bootstrapping": "bootstrap from pre-reset state on timeouts (False = treat as failures)",
    "train actor": "False freezes the policy at its initialization",
    "mean head init std": "std of the mean-head weights at init",
    "log std min": "lower clamp of the log-std head",
    "log std max": "upper clamp of the log-std head",
    "number of critics": "critic ensemble size",
    "loss ceiling": "abort when the critic loss exceeds this",
    "normalizer clip": "clip bound for normalized observations",
    "checkpoint every": "iterations between checkpoints (0 = only at the end)",
    "metrics path": "JSON-lines metrics output",
    "checkpoint path": "checkpoint output file",
    "horizon": "override the env episode horizon",
    "evaluation": "mapping of evaluation settings (episodes, hold window, thresholds)",
}

EXTRA_SAC_KEYS = {
    "timeout bootstrapping": "timeout_bootstrap",
    "train actor": "train_actor",
    "mean head init std": "mean_init_std",
    "log std min": "log_std_min",
    "log std max": "log_std_max",
    "number of critics": "num_critics",
    "loss ceiling": "loss_ceiling",
}

PAPER_PROFILE = {
    "environments": 8192,
    "step time seconds": 0.02,
    "rollout steps per environment": 24,
    "max iterations": 800,
    "training start iteration": 1,
    "replay buffer size": 5_000_000,
    "learning epochs": 1,
    "mini-batches": 200,
    "mini-batch size": 8192,
    "actor learning rate": 2e-4,
    "critic learning rate": 2e-4,
    "temperature learning rate": 2e-5,
    "discount factor": 0.97,
    "target smoothing coefficient": 0.003,
    "initial temperature": 0.001,
    "automatic temperature tuning": True,
    "target entropy scale": 0.167,
    "max gradient norm": 1.0,
    "policy update frequency": 1,
    "multi-step return horizon": 5,
    "actor observation normalization": True,
    "critic observation normalization": True,
    "actor hidden dimensions": [1024, 512, 256],
    "critic hidden dimensions": [1024, 512, 256],
    "activation": "SiLU",
    "layer normalization": False,
    "initial action noise std": 0.15,
    "precision": "float32",
}

# scaled down for a single CPU; keys not listed keep their paper-profile values
DESK_OVERRIDES = {
    "environments": 64,
    "step time seconds": None,        # keep each env's own control step
    "max iterations": 100,
    "replay buffer size": 200_000,
    "mini-batches": 16,
    "mini-batch size": 1024,
    "actor hidden dimensions": [256, 128],
    "critic hidden dimensions": [256, 128],
    "actor learning rate": 1e-3,
    "critic learning rate": 1e-3,
    "temperature learning rate": 1e-2,
    "target smoothing coefficient": 0.02,
}
PROFILES = {"paper": PAPER_PROFILE, "desk": {**PAPER_PROFILE, **DESK_OVERRIDES}}

KNOWN_KEYS = set(SAC_KEYS) | set(RUN_TABLE_KEYS) | set(EXTRA_KEYS) | {"profile"}


@dataclass
class RunConfig:
    sac: SacConfig
    env: str | dict
    seed: int = 0
    max_iterations: int = 800
    training_start_iteration: int = 1
    buffer_size: int = 5_000_000
    dt: float | None = None
    horizon: int | None = None
    normalize_obs: bool = True
    normalizer_clip: float = 10.0
    precision: str = "float32"
    checkpoint_every: int = 0
    metrics_path: str | None = None
    checkpoint_path: str | None = None
    evaluation: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)   # merged key table this config was built from

    def __post_init__(self):
        if self.precision not in ("float32", "float64"):
            raise ConfigError(f"precision must be float32 or float64, got {self.precision!r}")
        if self.max_iterations < 0 or self.training_start_iteration < 0:
            raise ConfigError("iteration counts must be non-negative")
        if self.buffer_size < self.sac.num_envs * self.sac.n_step:
            raise ConfigError("replay buffer too small to hold one n-step window per env")
        for p in (self.metrics_path, self.checkpoint_path):
            if p is not None and not Path(p).resolve().parent.exists():
                raise ConfigError(f"output directory for {p!r} does not exist")

    @property
    def capacity_per_env(self) -> int:
        return self.buffer_size // self.sac.num_envs

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)


def _activation(name) -> str:
    name = str(name).lower()
    if name not in ("silu", "elu", "relu", "tanh", "identity"):
        raise ConfigError(f"unsupported activation {name!r}")
    return name


def build_config(values: dict) -> RunConfig:
    """Build a RunConfig from a complete merged key table."""
    unknown = set(values) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if values.get("layer normalization"):
        raise ConfigError("layer normalization is not supported")
    if "env" not in values:
        raise ConfigError("config must name an env")
    actor_norm = bool(values.get("actor observation normalization", True))
    critic_norm = bool(values.get("critic observation normalization", True))
    if actor_norm != critic_norm:
        raise ConfigError("actor and critic share one observation normalizer; "
                          "their normalization flags must agree")
    sac_kw = {attr: values[k] for k, attr in {**SAC_KEYS, **EXTRA_SAC_KEYS}.items() if k in values}
    if "activation" in sac_kw:
        sac_kw["activation"] = _activation(sac_kw["activation"])
    epochs = int(values.get("learning epochs", 1))
    sac_kw["updates_per_iteration"] = epochs * int(values.get("mini-batches", 200))
    for k in ("num_envs", "steps_per_env", "batch_size", "policy_update_period", "n_step",
              "num_critics"):
        if k in sac_kw:
            sac_kw[k] = int(sac_kw[k])
    for k in ("actor_lr", "critic_lr", "alpha_lr", "gamma", "tau", "init_alpha",
              "target_entropy_scale", "max_grad_norm", "init_std", "mean_init_std",
              "log_std_min", "log_std_max", "loss_ceiling"):
        if k in sac_kw:
            sac_kw[k] = float(sac_kw[k])
    try:
        sac = SacConfig(**sac_kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None
    dt = values.get("step time seconds")
    return RunConfig(
        sac=sac,
        env=values["env"],
        seed=int(values.get("seed", 0)),
        max_iterations=int(values.get("max iterations", 800)),
        training_start_iteration=int(values.get("training start iteration", 1)),
        buffer_size=int(values.get("replay buffer size", 5_000_000)),
        dt=None if dt is None else float(dt),
        horizon=None if values.get("horizon") is None else int(values["horizon"]),
        normalize_obs=actor_norm,
        normalizer_clip=float(values.get("normalizer clip", 10.0)),
        precision=str(values.get("precision", "float32")),
        checkpoint_every=int(values.get("checkpoint every", 0)),
        metrics_path=values.get("metrics path"),
        checkpoint_path=values.get("checkpoint path"),
        evaluation=dict(values.get("evaluation") or {}),
        raw=copy.deepcopy(values),
    )


def merge_config(file_values: dict | None = None, profile: str | None = None,
                 **overrides) -> dict:
    file_values = dict(file_values or {})
    profile = profile or file_values.pop("profile", None) or "desk"
    file_values.pop("profile", None)
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    merged = {**PROFILES[profile], **file_values}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    merged["profile"] = profile
    return merged


def load_config(ref: str | Path, profile: str | None = None,
                overrides: dict | None = None) -> RunConfig:
    """Load a run config file (or a bundled run name) layered on a profile.

    ``overrides`` uses the same keys as the file, e.g. ``{"seed": 3}``.
    """
    with open(resolve_config_path(ref, "runs")) as f:
        values = yaml.safe_load(f) or {}
    if not isinstance(values, dict):
        raise ConfigError("config file must hold a mapping")
    return build_config(merge_config(values, profile, **(overrides or {})))
