"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[Tensor], lr: float, beta1: float = 0.9, beta2: float = 0.99, eps: float = 1e-8):
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            m=[np.zeros(p.shape) for p in params],
            v=[np.zeros(p.shape) for p in params],
        )


def adam_step(state: AdamState, params: Sequence[Tensor], grads: Sequence[np.ndarray | None] | None = None) -> None:
    """One in-place Adam update of ``params``; ``grads`` defaults to each ``.grad``.

    A missing gradient (``None``) is treated as zero.
    """
    if grads is None:
        grads = [p.grad for p in params]
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ValueError(
            f"adam_step: {len(params)} params, {len(grads)} grads, state for {len(state.m)}"
        )
    for p, m in zip(params, state.m):
        if p.shape != m.shape:
            raise ValueError(f"adam_step: parameter {p.name or ''} shape {p.shape} != state shape {m.shape}")

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    step = state.lr / c1
    root_c2 = np.sqrt(c2)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros(p.shape)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        # lr * (m / c1) / (sqrt(v / c2) + eps), without full-size temporaries per term
        denom = np.sqrt(v)
        denom /= root_c2
        denom += state.eps
        np.divide(m, denom, out=denom)
        denom *= step
        p.data -= denom
