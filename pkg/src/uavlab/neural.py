"""Plain-numpy MLP for Q-value regression.

Dense layers with ReLU hidden activations and a linear output head,
trained by MSE on the actions a batch actually took. Backprop, Adam and
global-norm gradient clipping are written out explicitly; no autodiff or
ML framework is involved. Everything is float64.

Weight layout: ``weights[i]`` has shape (fan_in, fan_out) and activations
are row vectors, so a layer computes ``h @ W + b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

WEIGHTS_FORMAT_VERSION = 1


class WeightsFormatError(ValueError):
    """Raised when a weights file is malformed or has the wrong version."""


@dataclass
class NetworkParams:
    """MLP parameters: per-layer weight matrices and bias vectors."""

    layer_dims: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def num_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass
class Gradients:
    """Loss gradients with the same shapes as :class:`NetworkParams`."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]


@dataclass
class OptimizerState:
    """Adam first/second moment estimates plus the step counter."""

    m_w: List[np.ndarray]
    v_w: List[np.ndarray]
    m_b: List[np.ndarray]
    v_b: List[np.ndarray]
    t: int = 0

    @classmethod
    def create(cls, params: NetworkParams) -> "OptimizerState":
        return cls(m_w=[np.zeros_like(w) for w in params.weights],
                   v_w=[np.zeros_like(w) for w in params.weights],
                   m_b=[np.zeros_like(b) for b in params.biases],
                   v_b=[np.zeros_like(b) for b in params.biases])


def init_network(layer_dims: Sequence[int], rng: np.random.Generator) -> NetworkParams:
    """Gaussian fan-in initialization, zero biases.

    The first layer uses std sqrt(1/fan_in); deeper layers see rectified
    inputs and use sqrt(2/fan_in), which keeps pre-activation variance
    roughly constant through the stack.
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2:
        raise ValueError("need at least an input and an output dimension")
    if any(d < 1 for d in dims):
        raise ValueError(f"layer dims must be positive, got {dims}")
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        std = np.sqrt((1.0 if i == 0 else 2.0) / fan_in)
        weights.append(rng.normal(0.0, std, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(layer_dims=dims, weights=weights, biases=biases)


def clone_network(params: NetworkParams) -> NetworkParams:
    """Deep copy, used for target-network snapshots."""
    return NetworkParams(layer_dims=params.layer_dims,
                         weights=[w.copy() for w in params.weights],
                         biases=[b.copy() for b in params.biases])


def forward(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Q-values for a batch (n, d_in) or a single observation (d_in,)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != params.layer_dims[0]:
        raise ValueError(f"input width {h.shape[1]} != network input "
                         f"{params.layer_dims[0]}")
    for i in range(params.n_layers):
        h = h @ params.weights[i] + params.biases[i]
        if i < params.n_layers - 1:
            h = np.maximum(h, 0.0)
    return h[0] if single else h


def _forward_trace(params: NetworkParams, x: np.ndarray):
    """Forward pass keeping per-layer inputs and pre-activations for backprop."""
    inputs = [np.asarray(x, dtype=float)]
    pre = []
    h = inputs[0]
    for i in range(params.n_layers):
        z = h @ params.weights[i] + params.biases[i]
        pre.append(z)
        h = np.maximum(z, 0.0) if i < params.n_layers - 1 else z
        if i < params.n_layers - 1:
            inputs.append(h)
    return inputs, pre


def td_loss(params: NetworkParams, obs: np.ndarray, actions: np.ndarray,
            targets: np.ndarray) -> float:
    """Mean squared error between Q(s, a) and the targets."""
    q = forward(params, obs)
    picked = q[np.arange(len(actions)), actions]
    return float(np.mean((picked - np.asarray(targets, dtype=float)) ** 2))


def loss_and_gradients(params: NetworkParams, obs: np.ndarray, actions: np.ndarray,
                       targets: np.ndarray) -> Tuple[float, Gradients]:
    """MSE on the taken actions and its exact gradient via backprop.

    Only the output units matching ``actions`` receive error signal; the
    ReLU subgradient at exactly zero is taken as zero.
    """
    obs = np.asarray(obs, dtype=float)
    actions = np.asarray(actions, dtype=int)
    targets = np.asarray(targets, dtype=float)
    n = obs.shape[0]
    if not (len(actions) == len(targets) == n):
        raise ValueError("obs, actions and targets must have matching lengths")
    inputs, pre = _forward_trace(params, obs)
    out = pre[-1]
    picked = out[np.arange(n), actions]
    err = picked - targets
    loss = float(np.mean(err ** 2))

    delta = np.zeros_like(out)
    delta[np.arange(n), actions] = 2.0 * err / n
    g_w = [np.empty(0)] * params.n_layers
    g_b = [np.empty(0)] * params.n_layers
    for i in range(params.n_layers - 1, -1, -1):
        g_w[i] = inputs[i].T @ delta
        g_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (pre[i - 1] > 0.0)
    return loss, Gradients(weights=g_w, biases=g_b)


def gradient_global_norm(grads: Gradients) -> float:
    """L2 norm over every parameter gradient jointly."""
    total = sum(float(np.sum(g * g)) for g in grads.weights)
    total += sum(float(np.sum(g * g)) for g in grads.biases)
    return float(np.sqrt(total))


def optimizer_step(params: NetworkParams, grads: Gradients, opt: OptimizerState,
                   lr: float, beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8, clip_norm: float = 10.0) -> None:
    """One Adam update in place; gradients are global-norm clipped first."""
    if lr <= 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    norm = gradient_global_norm(grads)
    scale = clip_norm / norm if (clip_norm > 0.0 and norm > clip_norm) else 1.0
    opt.t += 1
    c1 = 1.0 - beta1 ** opt.t
    c2 = 1.0 - beta2 ** opt.t
    for arrays, g_list, m_list, v_list in (
            (params.weights, grads.weights, opt.m_w, opt.v_w),
            (params.biases, grads.biases, opt.m_b, opt.v_b)):
        for p, g, m, v in zip(arrays, g_list, m_list, v_list):
            g = g * scale
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_weights(params: NetworkParams, path: str) -> None:
    """Versioned JSON weights file; float64 values round-trip bitwise."""
    doc = {
        "format_version": WEIGHTS_FORMAT_VERSION,
        "layer_dims": list(params.layer_dims),
        "layers": [{"weights": w.tolist(), "biases": b.tolist()}
                   for w, b in zip(params.weights, params.biases)],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_weights(path: str) -> NetworkParams:
    """Read a weights file, validating version and layer shapes."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise WeightsFormatError(f"malformed weights file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise WeightsFormatError(f"weights file {path} is not a JSON object")
    if doc.get("format_version") != WEIGHTS_FORMAT_VERSION:
        raise WeightsFormatError(f"unsupported weights format version "
                                 f"{doc.get('format_version')!r} in {path}")
    try:
        dims = tuple(int(d) for d in doc["layer_dims"])
        layers = doc["layers"]
        if len(layers) != len(dims) - 1:
            raise WeightsFormatError(f"{path}: {len(layers)} layers for dims {dims}")
        weights, biases = [], []
        for i, layer in enumerate(layers):
            w = np.array(layer["weights"], dtype=float)
            b = np.array(layer["biases"], dtype=float)
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise WeightsFormatError(
                    f"{path}: layer {i} has shape {w.shape}/{b.shape}, "
                    f"expected {(dims[i], dims[i + 1])}/{(dims[i + 1],)}")
            weights.append(w)
            biases.append(b)
        return NetworkParams(layer_dims=dims, weights=weights, biases=biases)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, WeightsFormatError):
            raise
        raise WeightsFormatError(f"weights file {path} is invalid: {exc}") from exc
