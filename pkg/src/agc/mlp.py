"""One-hidden-layer MLP with hand-written backward pass, and Adam.

Parameters are plain dicts of float64 arrays keyed ``w1, b1, w2, b2`` (plus
``mu`` for prototype heads), which keeps the optimizer generic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .errors import ShapeMismatch

MlpParams = Dict[str, np.ndarray]


def init_mlp(in_dim: int, hidden: int, out_dim: int, rng: np.random.Generator) -> MlpParams:
    """Kaiming-uniform weights, fan-in scaled uniform biases."""
    bound1 = math.sqrt(6.0 / in_dim)
    bound2 = math.sqrt(6.0 / hidden)
    return {
        "w1": rng.uniform(-bound1, bound1, size=(in_dim, hidden)),
        "b1": rng.uniform(-1.0, 1.0, size=hidden) / math.sqrt(in_dim),
        "w2": rng.uniform(-bound2, bound2, size=(hidden, out_dim)),
        "b2": rng.uniform(-1.0, 1.0, size=out_dim) / math.sqrt(hidden),
    }


def mlp_forward(x, params: MlpParams):
    """Return ``(output, cache)``; output is the linear last layer."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params["w1"].shape[0]:
        raise ShapeMismatch(f"input of shape {x.shape} for w1 of shape {params['w1'].shape}")
    pre = x @ params["w1"] + params["b1"]
    hid = np.maximum(pre, 0.0)
    out = hid @ params["w2"] + params["b2"]
    return out, (x, pre, hid)


def mlp_backward(d_out, cache, params: MlpParams) -> MlpParams:
    x, pre, hid = cache
    d_hid = d_out @ params["w2"].T
    d_pre = d_hid * (pre > 0)
    return {
        "w1": x.T @ d_pre,
        "b1": d_pre.sum(axis=0),
        "w2": hid.T @ d_out,
        "b2": d_out.sum(axis=0),
    }


def softmax(logits) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(d_probs, probs) -> np.ndarray:
    return probs * (d_probs - (d_probs * probs).sum(axis=1, keepdims=True))


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState):
    """One bias-corrected Adam update. Returns new ``(params, state)``."""
    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        g = grads[name]
        if g.shape != value.shape:
            raise ShapeMismatch(f"gradient for {name} has shape {g.shape}, param {value.shape}")
        m = b1 * state.m.get(name, np.zeros_like(value)) + (1.0 - b1) * g
        v = b2 * state.v.get(name, np.zeros_like(value)) + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**step)
        v_hat = v / (1.0 - b2**step)
        new_params[name] = value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name], new_v[name] = m, v
    return new_params, AdamState(state.lr, b1, b2, state.eps, step, new_m, new_v)
