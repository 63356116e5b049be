"""Environment registry and description-file loading."""

from __future__ import annotations

from pathlib import Path

import yaml

from ..bounds import JointSpec
from ..errors import ConfigError
from .base import EnvSpec, StepResult, VecEnv
from .rewards import RewardTermConfig
from .toy import ChainEnv, PendulumSwingup, PointMassTracker

ENVS: dict[str, type[VecEnv]] = {
    "chain": ChainEnv,
    "point_mass": PointMassTracker,
    "pendulum": PendulumSwingup,
}

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def env_spec_from_dict(d: dict, **overrides) -> EnvSpec:
    d = {**d, **{k: v for k, v in overrides.items() if v is not None}}
    name = d.get("env")
    if name not in ENVS:
        raise ConfigError(f"unknown env {name!r}; available: {sorted(ENVS)}")
    joints = [JointSpec.from_dict(j) for j in d.get("joints", [])]
    rewards = [RewardTermConfig.from_dict(r) for r in d.get("rewards", [])]
    try:
        return EnvSpec(name=name, obs_dim=ENVS[name].obs_dim, action_dim=len(joints),
                       joints=joints, horizon=int(d["horizon"]), dt=float(d["dt"]),
                       num_envs=int(d.get("num_envs", 1)), rewards=rewards,
                       params=dict(d.get("params") or {}))
    except KeyError as e:
        raise ConfigError(f"env description missing key {e}") from None


def resolve_config_path(ref: str | Path, subdir: str) -> Path:
    """A file path, or the name of a bundled config under ``configs/<subdir>``."""
    p = Path(ref)
    if p.exists():
        return p
    bundled = CONFIG_DIR / subdir / f"{ref}.yaml"
    if bundled.exists():
        return bundled
    raise ConfigError(f"cannot find config {ref!r}")


def load_env_spec(ref: str | Path | dict, **overrides) -> EnvSpec:
    if isinstance(ref, dict):
        return env_spec_from_dict(ref, **overrides)
    with open(resolve_config_path(ref, "envs")) as f:
        return env_spec_from_dict(yaml.safe_load(f), **overrides)


def load_reward_table(ref: str | Path) -> list[RewardTermConfig]:
    """Reward term list from a standalone reward file (``configs/rewards``)."""
    with open(resolve_config_path(ref, "rewards")) as f:
        d = yaml.safe_load(f)
    return [RewardTermConfig.from_dict(r) for r in d["rewards"]]


def make_env(spec: EnvSpec, seed: int = 0) -> VecEnv:
    return ENVS[spec.name](spec, seed)


__all__ = ["ENVS", "EnvSpec", "StepResult", "VecEnv", "RewardTermConfig", "ChainEnv",
           "PointMassTracker", "PendulumSwingup", "env_spec_from_dict", "load_env_spec",
           "load_reward_table", "make_env"]
