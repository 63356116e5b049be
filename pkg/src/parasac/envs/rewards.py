"""Contact-free locomotion reward terms.

Each term is a pure function that already includes its weight, so an
environment reward is the plain sum of its configured terms. Inputs are
batched over environments along the leading axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import ConfigError


def reward_track_lin_vel(cmd_xy, vel_xy, sigma: float = 0.5, weight: float = 1.0):
    """``w * exp(-||c - v||^2 / sigma^2)`` over the last axis."""
    if not sigma > 0:
        raise ConfigError("tracking kernel width must be > 0")
    err = np.sum(np.square(np.asarray(cmd_xy) - np.asarray(vel_xy)), axis=-1)
    return weight * np.exp(-err / sigma ** 2)


def reward_track_ang_vel(cmd_z, ang_vel_z, sigma: float = 0.5, weight: float = 0.5):
    if not sigma > 0:
        raise ConfigError("tracking kernel width must be > 0")
    err = np.square(np.asarray(cmd_z) - np.asarray(ang_vel_z))
    return weight * np.exp(-err / sigma ** 2)


def penalty_quadratic(x, weight: float):
    """``w * ||x||^2`` over the last axis; scalars and 1-D inputs are one term each."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        return weight * x * x
    return weight * np.sum(x * x, axis=-1)


def penalty_joint_limits(q, soft_min, soft_max, weight: float):
    q = np.asarray(q, dtype=np.float64)
    over = np.maximum(q - soft_max, 0.0) + np.maximum(soft_min - q, 0.0)
    return weight * np.sum(over, axis=-1)


def penalty_joint_deviation(q, q0, weight: float):
    q = np.asarray(q, dtype=np.float64)
    return weight * np.sum(np.abs(q - q0), axis=-1)


def reward_termination(is_failure, weight: float = -200.0):
    """``w`` on failure steps only; timeouts and running steps give 0."""
    return weight * np.asarray(is_failure, dtype=np.float64)


@dataclass(frozen=True)
class RewardTermConfig:
    name: str
    weight: float
    sigma: float | None = None
    joints: tuple[str, ...] | None = None
    symbol: str | None = None

    def __post_init__(self):
        if self.name not in TERMS and self.name not in REPRESENTATIONAL_TERMS:
            raise ConfigError(f"unknown reward term {self.name!r}")
        if self.name in TRACKING_TERMS and not (self.sigma and self.sigma > 0):
            raise ConfigError(f"reward term {self.name!r} needs sigma > 0")

    @property
    def simulated(self) -> bool:
        return self.name in TERMS

    @classmethod
    def from_dict(cls, d: dict) -> "RewardTermConfig":
        if "name" not in d or "weight" not in d:
            raise ConfigError(f"reward term needs name and weight: {d!r}")
        sigma = d.get("sigma")
        if sigma is None and d["name"] in TRACKING_TERMS:
            sigma = 0.5
        joints = d.get("joints")
        return cls(str(d["name"]), float(d["weight"]), None if sigma is None else float(sigma),
                   None if joints is None else tuple(joints), d.get("symbol"))

    def to_dict(self) -> dict:
        out = {"name": self.name, "weight": self.weight}
        if self.sigma is not None:
            out["sigma"] = self.sigma
        if self.joints is not None:
            out["joints"] = list(self.joints)
        if self.symbol is not None:
            out["symbol"] = self.symbol
        return out


def _select(q: dict, key: str, cfg: RewardTermConfig):
    x = np.asarray(q[key])
    if cfg.joints is None:
        return x, None
    names = list(q["joint_names"])
    try:
        idx = [names.index(j) for j in cfg.joints]
    except ValueError as e:
        raise ConfigError(f"reward term {cfg.name!r}: {e}") from None
    return x[..., idx], idx


def _joint_limits(q, cfg):
    pos, idx = _select(q, "joint_pos", cfg)
    lo, hi = np.asarray(q["soft_min"]), np.asarray(q["soft_max"])
    if idx is not None:
        lo, hi = lo[idx], hi[idx]
    return penalty_joint_limits(pos, lo, hi, cfg.weight)


def _joint_deviation(q, cfg):
    pos, idx = _select(q, "joint_pos", cfg)
    q0 = np.asarray(q["default_joint_pos"])
    return penalty_joint_deviation(pos, q0 if idx is None else q0[idx], cfg.weight)


TERMS: dict[str, Callable[[dict, RewardTermConfig], np.ndarray]] = {
    "track_lin_vel_xy": lambda q, c: reward_track_lin_vel(q["cmd_lin_vel_xy"], q["lin_vel_xy"],
                                                          c.sigma, c.weight),
    "track_ang_vel_z": lambda q, c: reward_track_ang_vel(q["cmd_ang_vel_z"], q["ang_vel_z"],
                                                         c.sigma, c.weight),
    "lin_vel_z": lambda q, c: penalty_quadratic(np.asarray(q["lin_vel_z"])[..., None], c.weight),
    "ang_vel_xy": lambda q, c: penalty_quadratic(q["ang_vel_xy"], c.weight),
    "joint_torque": lambda q, c: penalty_quadratic(_select(q, "joint_torque", c)[0], c.weight),
    "joint_acc": lambda q, c: penalty_quadratic(_select(q, "joint_acc", c)[0], c.weight),
    "action_rate": lambda q, c: penalty_quadratic(np.asarray(q["action"]) - q["prev_action"],
                                                  c.weight),
    "joint_limits": _joint_limits,
    "joint_deviation": _joint_deviation,
    "termination": lambda q, c: reward_termination(q["failure"], c.weight),
    # toy-env terms
    "alive": lambda q, c: c.weight * np.ones(np.shape(q["failure"])),
    "angle": lambda q, c: penalty_quadratic(np.asarray(q["angle"])[..., None], c.weight),
    "angular_velocity": lambda q, c: penalty_quadratic(np.asarray(q["angular_velocity"])[..., None],
                                                       c.weight),
}

TRACKING_TERMS = ("track_lin_vel_xy", "track_ang_vel_z")

# need contact physics; loadable from config for completeness but never computed
REPRESENTATIONAL_TERMS = ("feet_air_time", "feet_slide", "undesired_contacts", "flat_orientation")


def compute_reward(terms: Sequence[RewardTermConfig], quantities: dict):
    """Total reward and the per-term contributions."""
    parts = {}
    for cfg in terms:
        if not cfg.simulated:
            raise ConfigError(f"reward term {cfg.name!r} requires contact physics")
        key = cfg.name if cfg.joints is None else f"{cfg.name}[{','.join(cfg.joints)}]"
        parts[key] = TERMS[cfg.name](quantities, cfg)
    total = sum(parts.values()) if parts else np.zeros(np.shape(quantities["failure"]))
    return total, parts
