"""Adam with bias correction over named parameter arrays."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamState", "adam_init", "adam_step"]


@dataclass
class AdamState:
    m: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    v: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def copy(self) -> "AdamState":
        return AdamState(OrderedDict((k, a.copy()) for k, a in self.m.items()),
                         OrderedDict((k, a.copy()) for k, a in self.v.items()),
                         self.step, self.beta1, self.beta2, self.eps)


def adam_init(arrays) -> AdamState:
    return AdamState(OrderedDict((k, np.zeros_like(a)) for k, a in arrays.items()),
                     OrderedDict((k, np.zeros_like(a)) for k, a in arrays.items()))


def adam_step(arrays, grads, state: AdamState, lr: float):
    """One bias-corrected Adam update.

    Returns ``(new_arrays, new_state)``; the inputs are left untouched.
    """
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for {name}")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    new_arrays, new_m, new_v = OrderedDict(), OrderedDict(), OrderedDict()
    for name, p in arrays.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        new_arrays[name] = (p - lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype, copy=False)
        new_m[name] = m
        new_v[name] = v
    return new_arrays, AdamState(new_m, new_v, t, b1, b2, state.eps)
