"""Minimal MLP with squared-loss backprop, Adam, and Polyak-averaged targets.

Fixed-depth fully connected net with ReLU hidden layers and a scalar linear
output, in float64 throughout so gradients can be checked against finite
differences tightly. Parameters are value objects: every update returns new
arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import Array

HIDDEN_SIZES = (128, 128)


@dataclass
class Mlp:
    """Layer weights and biases; weights[i] has shape (fan_in, fan_out)."""

    weights: list
    biases: list

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def layer_sizes(self) -> list:
        return [w.shape[1] for w in self.weights]


def init_mlp(input_dim: int, rng: np.random.Generator,
             hidden: tuple = HIDDEN_SIZES) -> Mlp:
    """He-uniform fan-in initialisation, zero biases."""
    sizes = [input_dim, *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases)


def copy_mlp(net: Mlp) -> Mlp:
    return Mlp([w.copy() for w in net.weights], [b.copy() for b in net.biases])


def cast_mlp(net: Mlp, dtype) -> Mlp:
    """Same parameters in another dtype (e.g. float32 for bulk inference)."""
    return Mlp([w.astype(dtype) for w in net.weights],
               [b.astype(dtype) for b in net.biases])


# Large batches run in row chunks so layer activations stay cache-resident.
_FORWARD_CHUNK = 1024


def forward(net: Mlp, x: Array):
    """Scalar output for a single input vector, or (B,) for a (B, d) batch."""
    x = np.asarray(x, dtype=net.weights[0].dtype)
    single = x.ndim == 1
    rows = x[None, :] if single else x
    if rows.shape[-1] != net.input_dim:
        raise ValueError(f"input dim {rows.shape[-1]} != network input dim {net.input_dim}")
    n = len(rows)
    out = np.empty(n, dtype=rows.dtype)
    for i in range(0, n, _FORWARD_CHUNK):
        h = rows[i:i + _FORWARD_CHUNK]
        for w, b in zip(net.weights[:-1], net.biases[:-1]):
            h = h @ w
            h += b
            np.maximum(h, 0.0, out=h)
        out[i:i + _FORWARD_CHUNK] = (h @ net.weights[-1])[:, 0]
    out += net.biases[-1][0]
    return float(out[0]) if single else out


def grad_mse(net: Mlp, x: Array, y: Array):
    """Exact gradient of the mean squared loss over a batch.

    Returns (grads, loss) where grads mirrors the Mlp layout.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("batch must be a nonempty (B, d) array")

    pre, post = [], [x]
    h = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        post.append(h)
    out = (h @ net.weights[-1] + net.biases[-1])[:, 0]

    resid = out - y
    loss = float(np.mean(resid**2))
    delta = (2.0 / len(x)) * resid[:, None]

    g_w = [None] * len(net.weights)
    g_b = [None] * len(net.biases)
    for i in range(len(net.weights) - 1, -1, -1):
        g_w[i] = post[i].T @ delta
        g_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i].T) * (pre[i - 1] > 0)
    return Mlp(g_w, g_b), loss


@dataclass
class AdamState:
    m_w: list
    v_w: list
    m_b: list
    v_b: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(net: Mlp) -> AdamState:
    return AdamState(
        m_w=[np.zeros_like(w) for w in net.weights],
        v_w=[np.zeros_like(w) for w in net.weights],
        m_b=[np.zeros_like(b) for b in net.biases],
        v_b=[np.zeros_like(b) for b in net.biases],
    )


def adam_step(net: Mlp, grads: Mlp, state: AdamState, lr: float):
    """One bias-corrected Adam update; returns (new params, new state)."""
    if lr <= 0:
        raise ValueError("lr must be > 0")
    t = state.step + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t

    def upd(p, g, m, v):
        m_new = state.beta1 * m + (1 - state.beta1) * g
        v_new = state.beta2 * v + (1 - state.beta2) * g * g
        p_new = p - lr * (m_new / c1) / (np.sqrt(v_new / c2) + state.eps)
        return p_new, m_new, v_new

    new_w, m_w, v_w = zip(*[upd(p, g, m, v) for p, g, m, v in
                            zip(net.weights, grads.weights, state.m_w, state.v_w)])
    new_b, m_b, v_b = zip(*[upd(p, g, m, v) for p, g, m, v in
                            zip(net.biases, grads.biases, state.m_b, state.v_b)])
    new_state = AdamState(list(m_w), list(v_w), list(m_b), list(v_b), step=t,
                          beta1=state.beta1, beta2=state.beta2, eps=state.eps)
    return Mlp(list(new_w), list(new_b)), new_state


def polyak_update(target: Mlp, online: Mlp, eta: float) -> Mlp:
    """target <- eta * target + (1 - eta) * online, elementwise."""
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must be in (0, 1)")
    return Mlp(
        [eta * tw + (1 - eta) * ow for tw, ow in zip(target.weights, online.weights)],
        [eta * tb + (1 - eta) * ob for tb, ob in zip(target.biases, online.biases)],
    )


# --- persistence ------------------------------------------------------------
# Weights file: JSON object with input_dim, layer_sizes, weights as row-major
# nested lists (one per layer, shape fan_in x fan_out), biases as flat lists,
# and an optional metadata object. float64 values round-trip exactly.

def save_mlp(path, net: Mlp, metadata: dict | None = None) -> None:
    payload = {
        "input_dim": net.input_dim,
        "layer_sizes": net.layer_sizes,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "metadata": metadata or {},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, allow_nan=False)


def load_mlp(path):
    with open(path) as fh:
        payload = json.load(fh)
    net = Mlp(
        [np.array(w, dtype=float) for w in payload["weights"]],
        [np.array(b, dtype=float) for b in payload["biases"]],
    )
    expected = [payload["input_dim"], *payload["layer_sizes"][:-1]]
    actual = [w.shape[0] for w in net.weights]
    if expected != actual:
        raise ValueError(f"weight shapes {actual} inconsistent with header {expected}")
    return net, payload.get("metadata", {})
