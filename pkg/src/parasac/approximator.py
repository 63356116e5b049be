"""Dense networks in plain numpy: forward pass, reverse-mode gradients and Adam.

Weights are stored as ``[out, in]`` matrices, so a layer computes
``x @ W.T + b``. Hidden layers share one activation; the output layer is
always linear.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from .errors import ConfigError, DivergenceError

ACTIVATIONS = ("silu", "elu", "relu", "tanh", "identity")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form: no overflow for large |z| and much faster than exp-based expit
    s = np.tanh(0.5 * z)
    s += 1
    s *= 0.5
    return s


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "silu":
        return z * _sigmoid(z)
    if name == "elu":
        return np.where(z > 0, z, np.expm1(np.minimum(z, 0)))
    if name == "relu":
        return np.maximum(z, 0)
    if name == "tanh":
        return np.tanh(z)
    if name == "identity":
        return z
    raise ConfigError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "silu":
        s = _sigmoid(z)
        return s * (1 + z * (1 - s))
    if name == "elu":
        return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0))).astype(z.dtype)
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "tanh":
        t = np.tanh(z)
        return 1 - t * t
    if name == "identity":
        return np.ones_like(z)
    raise ConfigError(f"unknown activation {name!r}")


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "silu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ConfigError("weights and biases must be non-empty and paired")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ConfigError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ConfigError(f"layer {i}: input width {w.shape[1]} does not chain")

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def arrays(self) -> list[np.ndarray]:
        """Parameters as a flat list ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "MlpParams":
        arrays = list(arrays)
        return MlpParams(arrays[0::2], arrays[1::2], self.activation)

    def copy(self) -> "MlpParams":
        return self.with_arrays([a.copy() for a in self.arrays()])

    def astype(self, dtype) -> "MlpParams":
        return self.with_arrays([a.astype(dtype) for a in self.arrays()])


@dataclass
class GradBundle:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


def mlp_init(layer_dims: Sequence[int], activation: str = "silu", seed=0,
             dtype=np.float64) -> MlpParams:
    """Fan-in scaled uniform weights in ``±sqrt(6 / fan_in)``, zero biases.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    dims = list(layer_dims)
    if len(dims) < 2 or any(int(d) <= 0 for d in dims):
        raise ConfigError(f"layer dims must have length >= 2 and be positive, got {dims}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return MlpParams(weights, biases, activation)


def _check_input(params: MlpParams, x: np.ndarray):
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise ConfigError(f"input shape {x.shape} does not match network input width {params.in_dim}")


def mlp_forward(params: MlpParams, inputs: np.ndarray, return_cache: bool = False):
    """Evaluate the network on a ``[B, in]`` batch.

    With ``return_cache`` the layer inputs and pre-activations are returned as
    well, for reuse by :func:`mlp_backward`.
    """
    _check_input(params, inputs)
    h = inputs
    layer_inputs, pre_acts = [], []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        layer_inputs.append(h)
        z = h @ w.T + b
        if i < last:
            pre_acts.append(z)
            h = _act(params.activation, z)
        else:
            h = z
    if return_cache:
        return h, (layer_inputs, pre_acts)
    return h


def mlp_backward(params: MlpParams, inputs: np.ndarray, upstream: np.ndarray, cache=None):
    """Gradients of ``sum(upstream * mlp_forward(params, inputs))``.

    Returns ``(GradBundle, d_inputs)``.
    """
    if cache is None:
        out, cache = mlp_forward(params, inputs, return_cache=True)
    else:
        _check_input(params, inputs)
    layer_inputs, pre_acts = cache
    if upstream.shape != (inputs.shape[0], params.out_dim):
        raise ConfigError(f"upstream shape {upstream.shape} does not match output "
                          f"({inputs.shape[0]}, {params.out_dim})")
    n = len(params.weights)
    gw: list = [None] * n
    gb: list = [None] * n
    delta = upstream
    for i in range(n - 1, -1, -1):
        gw[i] = delta.T @ layer_inputs[i]
        gb[i] = delta.sum(axis=0)
        delta = delta @ params.weights[i]
        if i > 0:
            delta = delta * _act_grad(params.activation, pre_acts[i - 1])
    return GradBundle(gw, gb), delta


@dataclass
class AdamState:
    lr: float
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_arrays(cls, arrays: Sequence[np.ndarray], lr: float, **kw) -> "AdamState":
        return cls(lr=lr, m=[np.zeros_like(a) for a in arrays],
                   v=[np.zeros_like(a) for a in arrays], **kw)


def global_norm(arrays: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(a, dtype=np.float64))) for a in arrays)))


def clip_by_global_norm(grads: Sequence[np.ndarray], max_norm: float):
    """Scale all gradients jointly so their global L2 norm is at most ``max_norm``.

    Returns ``(clipped, norm_before_clipping)``.
    """
    norm = global_norm(grads)
    if not np.isfinite(norm):
        raise DivergenceError("non-finite gradient norm")
    if norm > max_norm:
        scale = max_norm / norm
        return [g * g.dtype.type(scale) for g in grads], norm
    return list(grads), norm


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              max_grad_norm: float | None = None):
    """One bias-corrected Adam step over a list of arrays.

    Clipping (if ``max_grad_norm`` is given) is applied to the whole list at
    once. Returns ``(new_params, new_state)``; inputs are not modified.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ConfigError("params, grads and optimizer state have different lengths")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ConfigError(f"gradient shape {g.shape} does not match parameter {p.shape}")
    if max_grad_norm is not None:
        if max_grad_norm <= 0:
            raise ConfigError("max_grad_norm must be positive")
        grads, _ = clip_by_global_norm(grads, max_grad_norm)
    elif not all(np.all(np.isfinite(g)) for g in grads):
        raise DivergenceError("non-finite gradient")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1 - b1 ** t
    corr2 = 1 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * (g * g)
        step = state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
        new_p.append((p - step).astype(p.dtype, copy=False))
        new_m.append(m.astype(p.dtype, copy=False))
        new_v.append(v.astype(p.dtype, copy=False))
    new_state = AdamState(lr=state.lr, m=new_m, v=new_v, t=t, beta1=b1, beta2=b2, eps=state.eps)
    return new_p, new_state


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def finite_difference_grad(f: Callable[[], float], arrays: Sequence[np.ndarray], h: float = 1e-5,
                           indices=None) -> list[np.ndarray]:
    """Central differences of scalar ``f()`` with respect to ``arrays``.

    ``f`` closes over the arrays, which are perturbed in place and restored.
    ``indices`` optionally restricts each array to a subset of flat indices;
    unchecked entries are returned as NaN.
    """
    out = []
    for k, a in enumerate(arrays):
        g = np.full(a.shape, np.nan)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        idx = range(flat.size) if indices is None else indices[k]
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def gradient_check(f: Callable[[], float], arrays: Sequence[np.ndarray],
                   analytic: Sequence[np.ndarray], h: float = 1e-5, max_entries=None,
                   rng=None, floor: float = 1e-6) -> float:
    """Max relative error between ``analytic`` and central differences of ``f``.

    With ``max_entries`` only a random subset of entries per array is probed.
    """
    indices = None
    if max_entries is not None:
        rng = np.random.default_rng(rng)
        indices = [rng.choice(a.size, size=min(a.size, max_entries), replace=False) for a in arrays]
    numeric = finite_difference_grad(f, arrays, h=h, indices=indices)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        mask = ~np.isnan(n)
        worst = max(worst, max_relative_error(np.asarray(a)[mask], n[mask], floor))
    return worst
