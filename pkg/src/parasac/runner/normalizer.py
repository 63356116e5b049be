from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ObsNormalizer:
    """Running per-dimension mean/variance, merged batch-wise (Chan et al.)."""
    dim: int
    clip: float = 10.0
    eps: float = 1e-8
    mean: np.ndarray = field(default=None)
    var: np.ndarray = field(default=None)
    count: float = 0.0

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.var is None:
            self.var = np.ones(self.dim)

    def update(self, batch: np.ndarray) -> None:
        batch = np.asarray(batch, dtype=np.float64).reshape(-1, self.dim)
        n = batch.shape[0]
        if n == 0:
            return
        b_mean = batch.mean(axis=0)
        b_var = batch.var(axis=0)
        if self.count == 0:
            self.mean, self.var, self.count = b_mean, b_var, float(n)
            return
        total = self.count + n
        delta = b_mean - self.mean
        self.mean = self.mean + delta * (n / total)
        m2 = self.var * self.count + b_var * n + delta ** 2 * (self.count * n / total)
        self.var = m2 / total
        self.count = total

    def normalize(self, obs: np.ndarray, update: bool = False, dtype=None) -> np.ndarray:
        """``(obs - mean) / sqrt(var + eps)`` clipped to ``±clip``.

        With ``update`` the statistics absorb ``obs`` first; otherwise they
        are read frozen.
        """
        obs = np.asarray(obs)
        if obs.shape[-1] != self.dim:
            raise ValueError(f"observation width {obs.shape[-1]} != normalizer width {self.dim}")
        if update:
            self.update(obs)
        out = np.clip((obs - self.mean) / np.sqrt(self.var + self.eps), -self.clip, self.clip)
        return out.astype(dtype or obs.dtype, copy=False)

    def state_dict(self) -> dict:
        return {"mean": self.mean.copy(), "var": self.var.copy(), "count": self.count}

    def load_state_dict(self, state: dict) -> None:
        self.mean = np.asarray(state["mean"], np.float64).copy()
        self.var = np.asarray(state["var"], np.float64).copy()
        self.count = float(state["count"])


class IdentityNormalizer(ObsNormalizer):
    """Stand-in used when observation normalization is switched off."""

    def update(self, batch):
        pass

    def normalize(self, obs, update=False, dtype=None):
        obs = np.asarray(obs)
        return obs.astype(dtype or obs.dtype, copy=False)
