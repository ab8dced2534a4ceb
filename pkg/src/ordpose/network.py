"""Minimal explicit-gradient feedforward networks and the rmsprop optimizer.

Everything is plain numpy with hand-written reverse-mode gradients; no autograd.
Layer kinds: "linear", "relu", and "residual" (two linear+ReLU layers with a
skip connection, optional dropout after each ReLU).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ContractViolationError,
    DimensionMismatchError,
    TrainingDivergenceError,
)

DEFAULT_LEARNING_RATE = 2.5e-4
DEFAULT_RHO = 0.99
DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_dim: int
    out_dim: int
    hidden_dim: int = 128
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "relu", "residual"):
            raise ContractViolationError(f"unknown layer kind {self.kind!r}")
        if self.in_dim <= 0 or self.out_dim <= 0:
            raise ContractViolationError("layer dims must be positive")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ContractViolationError("dropout rate must be in [0, 1)")
        if self.kind == "relu" and self.in_dim != self.out_dim:
            raise ContractViolationError("relu layer cannot change dimension")
        if self.kind == "residual" and self.in_dim != self.out_dim:
            raise ContractViolationError("residual block needs in_dim == out_dim")


@dataclass
class NetworkParams:
    specs: list[LayerSpec]
    layers: list[dict]
    seed: int
    step: int = 0

    @property
    def in_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.specs[-1].out_dim


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(specs: list[LayerSpec], seed: int = 0) -> NetworkParams:
    """Seeded uniform Glorot initialization; biases start at zero."""
    for a, b in zip(specs, specs[1:]):
        if a.out_dim != b.in_dim:
            raise DimensionMismatchError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
    rng = np.random.default_rng(seed)
    layers = []
    for spec in specs:
        if spec.kind == "linear":
            layers.append({"W": _glorot(rng, spec.in_dim, spec.out_dim), "b": np.zeros(spec.out_dim)})
        elif spec.kind == "relu":
            layers.append({})
        else:  # residual
            layers.append(
                {
                    "W1": _glorot(rng, spec.in_dim, spec.hidden_dim),
                    "b1": np.zeros(spec.hidden_dim),
                    "W2": _glorot(rng, spec.hidden_dim, spec.out_dim),
                    "b2": np.zeros(spec.out_dim),
                }
            )
    return NetworkParams(specs=list(specs), layers=layers, seed=seed)


def _dropout_mask(rng, shape, rate):
    # inverted dropout: mask already carries the 1/(1-rate) scale
    return (rng.random(shape) >= rate) / (1.0 - rate)


def forward(params: NetworkParams, x, train: bool = False, rng: np.random.Generator | None = None):
    """Run the network; returns (output, cache) with cache feeding backward.

    Dropout is applied only when ``train=True`` and an rng is supplied;
    inference is deterministic.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != params.in_dim:
        raise DimensionMismatchError(f"input dim {x.shape[1]} != network in_dim {params.in_dim}")
    use_dropout = train and rng is not None
    cache = {"inputs": [], "extras": [], "batch": x.shape[0]}
    h = x
    for spec, layer in zip(params.specs, params.layers):
        cache["inputs"].append(h)
        if spec.kind == "linear":
            h = h @ layer["W"] + layer["b"]
            cache["extras"].append(None)
        elif spec.kind == "relu":
            h = np.maximum(h, 0.0)
            cache["extras"].append(None)
        else:  # residual
            a1 = h @ layer["W1"] + layer["b1"]
            r1 = np.maximum(a1, 0.0)
            m1 = _dropout_mask(rng, r1.shape, spec.dropout_rate) if use_dropout and spec.dropout_rate > 0 else None
            d1 = r1 * m1 if m1 is not None else r1
            a2 = d1 @ layer["W2"] + layer["b2"]
            r2 = np.maximum(a2, 0.0)
            m2 = _dropout_mask(rng, r2.shape, spec.dropout_rate) if use_dropout and spec.dropout_rate > 0 else None
            d2 = r2 * m2 if m2 is not None else r2
            h = h + d2
            cache["extras"].append((a1, d1, a2, m1, m2))
    cache["output"] = h
    return (h[0] if squeeze else h), cache


def backward(params: NetworkParams, cache, output_grad):
    """Exact reverse-mode gradients; returns (param_grads, input_grad)."""
    g = np.asarray(output_grad, dtype=float)
    if g.ndim == 1:
        g = g[None, :]
    if len(cache.get("inputs", ())) != len(params.layers):
        raise ContractViolationError("cache does not match this network")
    if g.shape != cache["output"].shape:
        raise DimensionMismatchError("output_grad shape does not match the cached forward pass")
    grads = [None] * len(params.layers)
    for idx in range(len(params.layers) - 1, -1, -1):
        spec, layer = params.specs[idx], params.layers[idx]
        h_in = cache["inputs"][idx]
        if spec.kind == "linear":
            grads[idx] = {"W": h_in.T @ g, "b": g.sum(axis=0)}
            g = g @ layer["W"].T
        elif spec.kind == "relu":
            grads[idx] = {}
            g = g * (h_in > 0)
        else:  # residual
            a1, d1, a2, m1, m2 = cache["extras"][idx]
            g_d2 = g * m2 if m2 is not None else g
            g_a2 = g_d2 * (a2 > 0)
            gW2 = d1.T @ g_a2
            gb2 = g_a2.sum(axis=0)
            g_d1 = g_a2 @ layer["W2"].T
            g_r1 = g_d1 * m1 if m1 is not None else g_d1
            g_a1 = g_r1 * (a1 > 0)
            gW1 = h_in.T @ g_a1
            gb1 = g_a1.sum(axis=0)
            grads[idx] = {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}
            g = g + g_a1 @ layer["W1"].T
    return grads, g


@dataclass
class OptimizerState:
    """Per-parameter running mean of squared gradients for rmsprop."""

    learning_rate: float = DEFAULT_LEARNING_RATE
    rho: float = DEFAULT_RHO
    epsilon: float = DEFAULT_EPSILON
    step_count: int = 0
    square_avg: list[dict] = field(default_factory=list)


def rmsprop_step(state: OptimizerState, params: NetworkParams, grads: list[dict]):
    """In-place rmsprop update: v <- rho*v + (1-rho)*g^2; th <- th - lr*g/(sqrt(v)+eps)."""
    if not state.square_avg:
        state.square_avg = [{k: np.zeros_like(v) for k, v in layer.items()} for layer in params.layers]
    for layer, g_layer, v_layer in zip(params.layers, grads, state.square_avg):
        for key in layer:
            g = g_layer[key]
            if not np.all(np.isfinite(g)):
                raise TrainingDivergenceError("non-finite gradient", step=state.step_count)
            v = v_layer[key]
            v *= state.rho
            v += (1.0 - state.rho) * g * g
            layer[key] -= state.learning_rate * g / (np.sqrt(v) + state.epsilon)
    state.step_count += 1
    params.step += 1
    return params, state


def flatten_params(layers: list[dict]) -> np.ndarray:
    """Concatenate all arrays (fixed key order) into one float64 vector."""
    parts = []
    for layer in layers:
        for key in sorted(layer):
            parts.append(np.asarray(layer[key], dtype=float).ravel())
    return np.concatenate(parts) if parts else np.zeros(0)


def unflatten_params(vec: np.ndarray, template: list[dict]) -> list[dict]:
    out, pos = [], 0
    for layer in template:
        new = {}
        for key in sorted(layer):
            arr = np.asarray(layer[key])
            new[key] = vec[pos : pos + arr.size].reshape(arr.shape).copy()
            pos += arr.size
        out.append(new)
    return out


def save_checkpoint(path, params: NetworkParams, extra: dict | None = None):
    """Single file: one JSON header line, then flat float64 weights."""
    header = {
        "specs": [vars(s) for s in params.specs],
        "seed": params.seed,
        "step": params.step,
        "extra": extra or {},
    }
    with open(path, "wb") as f:
        f.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        f.write(flatten_params(params.layers).tobytes())


def load_checkpoint(path) -> tuple[NetworkParams, dict]:
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode("utf-8"))
        raw = np.frombuffer(f.read(), dtype=np.float64)
    specs = [LayerSpec(**s) for s in header["specs"]]
    params = init_params(specs, seed=header["seed"])
    params.layers = unflatten_params(raw, params.layers)
    params.step = header["step"]
    return params, header.get("extra", {})
