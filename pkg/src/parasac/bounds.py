"""Per-joint policy output bounds derived from soft joint limits.

The environment turns a policy output ``a`` into a joint target
``scale * a + default_pos``. The admissible policy range for a joint is
therefore the distance from the default position to each soft limit,
divided by the scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class JointSpec:
    name: str
    default_pos: float
    soft_min: float
    soft_max: float
    hard_min: float
    hard_max: float
    action_scale: float

    def __post_init__(self):
        if not (self.hard_min <= self.soft_min < self.soft_max <= self.hard_max):
            raise ConfigError(
                f"joint {self.name!r}: need hard_min <= soft_min < soft_max <= hard_max, got "
                f"hard [{self.hard_min}, {self.hard_max}] soft [{self.soft_min}, {self.soft_max}]")
        if not (self.soft_min <= self.default_pos <= self.soft_max):
            raise ConfigError(f"joint {self.name!r}: default position {self.default_pos} "
                              f"outside soft limits [{self.soft_min}, {self.soft_max}]")
        if not self.action_scale > 0:
            raise ConfigError(f"joint {self.name!r}: action_scale must be > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "JointSpec":
        try:
            soft = d["soft_limits"]
            hard = d.get("hard_limits", soft)
            return cls(name=str(d["name"]), default_pos=float(d["default"]),
                       soft_min=float(soft[0]), soft_max=float(soft[1]),
                       hard_min=float(hard[0]), hard_max=float(hard[1]),
                       action_scale=float(d["scale"]))
        except (KeyError, IndexError, TypeError) as e:
            raise ConfigError(f"malformed joint entry {d!r}: {e}") from None


@dataclass(frozen=True)
class ActionBounds:
    a_min: np.ndarray
    a_max: np.ndarray

    def __post_init__(self):
        if self.a_min.shape != self.a_max.shape or self.a_min.ndim != 1:
            raise ConfigError("a_min and a_max must be 1-D vectors of equal length")
        if not np.all(self.a_min < self.a_max):
            raise ConfigError("bounds must satisfy a_min < a_max elementwise")

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.a_max + self.a_min)

    @property
    def half_range(self) -> np.ndarray:
        return 0.5 * (self.a_max - self.a_min)

    # short aliases matching the squash a = b + c * tanh(x)
    b = center
    c = half_range

    @property
    def dim(self) -> int:
        return self.a_min.shape[0]

    @classmethod
    def symmetric(cls, half_range, dim: int = 1) -> "ActionBounds":
        c = np.broadcast_to(np.asarray(half_range, dtype=np.float64), (dim,)).copy()
        return cls(-c, c.copy())


def derive_bounds(joints: Sequence[JointSpec]) -> ActionBounds:
    if not joints:
        raise ConfigError("at least one joint is required")
    a_min, a_max = [], []
    for j in joints:
        r_lo = abs(j.soft_min - j.default_pos)
        r_hi = abs(j.soft_max - j.default_pos)
        if r_lo == 0 or r_hi == 0:
            side = "lower" if r_lo == 0 else "upper"
            raise ConfigError(f"joint {j.name!r}: default position sits on the {side} soft limit")
        a_min.append(-r_lo / j.action_scale)
        a_max.append(r_hi / j.action_scale)
    return ActionBounds(np.array(a_min), np.array(a_max))


def env_action_transform(joints: Sequence[JointSpec], action: np.ndarray,
                         bounds: ActionBounds | None = None) -> np.ndarray:
    """Map policy outputs (``[d]`` or ``[B, d]``) to joint targets."""
    action = np.asarray(action)
    if action.shape[-1] != len(joints):
        raise ConfigError(f"action width {action.shape[-1]} != {len(joints)} joints")
    bounds = bounds or derive_bounds(joints)
    if np.any(action < bounds.a_min) or np.any(action > bounds.a_max):
        raise ValueError("action outside policy bounds")
    scale = np.array([j.action_scale for j in joints])
    default = np.array([j.default_pos for j in joints])
    return scale * action + default
