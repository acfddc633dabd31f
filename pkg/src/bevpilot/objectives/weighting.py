"""Learnable balancing of the three task losses.

Each task carries a log-variance scalar s; the combined loss is
sum_i exp(-s_i) * L_i + s_i, so a task can down-weight itself only by paying
the +s penalty. With all s at zero this is a plain sum.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np


@dataclass(frozen=True)
class LossWeights:
    """Per-task log-variance scalars, stored as shape-[1] arrays."""

    s_per: np.ndarray
    s_pre: np.ndarray
    s_pla: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v.shape != (1,):
                raise ValueError(f"LossWeights: {f.name} must be shape (1,), "
                                 f"got {v.shape}")

    def map(self, fn) -> "LossWeights":
        return LossWeights(**{f.name: fn(getattr(self, f.name)) for f in fields(self)})

    def effective(self) -> dict:
        """The positive multiplier each task currently receives."""
        return {"perception": float(np.exp(-self.s_per[0])),
                "prediction": float(np.exp(-self.s_pre[0])),
                "planning": float(np.exp(-self.s_pla[0]))}


def init_loss_weights(dtype=np.float64) -> LossWeights:
    return LossWeights(s_per=np.zeros(1, dtype=dtype),
                       s_pre=np.zeros(1, dtype=dtype),
                       s_pla=np.zeros(1, dtype=dtype))


def total_loss(l_per: float, l_pre: float, l_pla: float, weights: LossWeights):
    """Uncertainty-weighted sum of the three task losses. Returns (scalar, cache)."""
    s = np.array([weights.s_per[0], weights.s_pre[0], weights.s_pla[0]])
    l = np.array([l_per, l_pre, l_pla], dtype=np.float64)
    e = np.exp(-s)
    return float((e * l + s).sum()), (e, l)


def total_loss_backward(grad: float, cache):
    """VJP. Returns (grad_l_per, grad_l_pre, grad_l_pla, LossWeights grads)."""
    e, l = cache
    gl = grad * e
    gs = grad * (-e * l + 1.0)
    gw = LossWeights(s_per=np.array([gs[0]]), s_pre=np.array([gs[1]]),
                     s_pla=np.array([gs[2]]))
    return float(gl[0]), float(gl[1]), float(gl[2]), gw
