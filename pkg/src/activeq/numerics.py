"""Small fully connected networks, backprop, Adam, and a finite-difference check.

Networks here are tiny (tens to a few hundred parameters), so everything is
plain float64 numpy. Inputs may be a single vector or a batch of row vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

SERIALIZATION_VERSION = 1


def sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class Mlp:
    """Feed-forward net: sigmoid hidden layers, configurable output activation.

    ``weights[k]`` has shape ``(layer_dims[k + 1], layer_dims[k])``.
    """

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output_activation: str = "identity"

    def __post_init__(self):
        self.layer_dims = [int(d) for d in self.layer_dims]
        if len(self.layer_dims) < 2 or any(d < 1 for d in self.layer_dims):
            raise ValueError(f"layer_dims must hold >= 2 positive ints, got {self.layer_dims}")
        if self.output_activation not in ("identity", "sigmoid"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        n_layers = len(self.layer_dims) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ValueError("number of weight/bias arrays does not match layer_dims")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_dims[k + 1], self.layer_dims[k])
            if w.shape != expected:
                raise ValueError(f"layer {k}: weight shape {w.shape}, expected {expected}")
            if b.shape != (self.layer_dims[k + 1],):
                raise ValueError(f"layer {k}: bias shape {b.shape}, expected ({expected[0]},)")

    @classmethod
    def init(cls, layer_dims, rng: np.random.Generator, output_activation="identity") -> "Mlp":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(list(layer_dims), weights, biases, output_activation)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> list[np.ndarray]:
        """Parameter arrays (live references) in the order W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def copy(self) -> "Mlp":
        return Mlp(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.output_activation,
        )

    def to_dict(self) -> dict:
        return {
            "version": SERIALIZATION_VERSION,
            "layer_dims": list(self.layer_dims),
            "output_activation": self.output_activation,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        if d.get("version") != SERIALIZATION_VERSION:
            raise ValueError(f"unsupported network version {d.get('version')!r}")
        dims = d["layer_dims"]
        weights = [
            np.array(w, dtype=np.float64).reshape(dims[k + 1], dims[k])
            for k, w in enumerate(d["weights"])
        ]
        return cls(dims, weights, [np.array(b, dtype=np.float64) for b in d["biases"]],
                   d.get("output_activation", "identity"))


class MlpGrads(NamedTuple):
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out


def _as_batch(net: Mlp, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.layer_dims[0]:
        raise ValueError(
            f"input has {x.shape[-1]} features, network expects {net.layer_dims[0]}"
        )
    return x, single


def _activations(net: Mlp, x: np.ndarray) -> list[np.ndarray]:
    acts = [x]
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w.T + b
        if k < last or net.output_activation == "sigmoid":
            z = sigmoid(z)
        acts.append(z)
    return acts


def forward(net: Mlp, x) -> np.ndarray:
    """Final-layer activations for one input vector or a batch of rows."""
    batch, single = _as_batch(net, x)
    out = _activations(net, batch)[-1]
    return out[0] if single else out


def backward(net: Mlp, x, upstream) -> MlpGrads:
    """Gradient of ``sum(upstream * forward(net, x))`` w.r.t. parameters and inputs.

    For a batch the parameter gradients are summed over rows; ``inputs`` keeps
    one row per sample.
    """
    batch, single = _as_batch(net, x)
    g = np.asarray(upstream, dtype=np.float64)
    if single:
        g = g[None, :]
    if g.shape != (batch.shape[0], net.layer_dims[-1]):
        raise ValueError(f"upstream gradient has shape {g.shape}, expected {(batch.shape[0], net.layer_dims[-1])}")
    acts = _activations(net, batch)
    n_layers = len(net.weights)
    gw: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    for k in range(n_layers - 1, -1, -1):
        a = acts[k + 1]
        if k < n_layers - 1 or net.output_activation == "sigmoid":
            g = g * a * (1.0 - a)
        gw[k] = g.T @ acts[k]
        gb[k] = g.sum(axis=0)
        g = g @ net.weights[k]
    return MlpGrads(gw, gb, g[0] if single else g)


def finite_diff_grad(f: Callable[[Mlp], float], net: Mlp, eps: float = 1e-5) -> list[np.ndarray]:
    """Central differences of ``f(net)`` for every parameter, same layout as ``net.params()``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    grads = []
    for p in net.params():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f(net)
            flat[i] = orig - eps
            down = f(net)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * eps)
        grads.append(g)
    return grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params, **kwargs) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kwargs)

    def copy(self) -> "AdamState":
        return AdamState(
            [m.copy() for m in self.m], [v.copy() for v in self.v],
            self.step, self.learning_rate, self.beta1, self.beta2, self.epsilon,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state have different lengths")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return params, state
