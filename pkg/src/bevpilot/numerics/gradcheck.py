"""Central finite-difference verification of hand-derived gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

FD_STEP = 1e-5


@dataclass
class GradCheckReport:
    """Outcome of one gradient check.

    max_rel_error is |analytic - fd| / max(|analytic|, |fd|, 1) maximized over
    coordinates (the unit floor keeps near-zero gradients from amplifying
    finite-difference noise). worst_coord indexes the offending coordinate.
    """

    max_rel_error: float
    passed: bool
    worst_coord: tuple
    detail: str = ""

    def __str__(self):
        status = "ok" if self.passed else "FAIL"
        msg = f"{status}: max rel error {self.max_rel_error:.3e} at {self.worst_coord}"
        return msg + (f" ({self.detail})" if self.detail else "")


def grad_check(fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
               x0: np.ndarray, tolerance: float = 1e-4,
               step: float = FD_STEP) -> GradCheckReport:
    """Compare fn's analytic gradient against central finite differences.

    fn maps a float64 array to (scalar value, gradient array of x0's shape)
    and must be deterministic. x0 is promoted to float64; the closure is
    evaluated at x0 once for the analytic gradient and twice per coordinate
    for the differences.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    value, analytic = fn(x0)
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != x0.shape:
        raise ValueError(f"gradient shape {analytic.shape} != parameter shape {x0.shape}")
    if not np.isfinite(value) or not np.all(np.isfinite(analytic)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(analytic))[0]) \
            if not np.all(np.isfinite(analytic)) else ()
        return GradCheckReport(np.inf, False, bad, "non-finite analytic value")

    worst = 0.0
    worst_coord = ()
    flat = x0.reshape(-1)
    for i in range(flat.size):
        xp = flat.copy(); xp[i] += step
        xm = flat.copy(); xm[i] -= step
        fp, _ = fn(xp.reshape(x0.shape))
        fm, _ = fn(xm.reshape(x0.shape))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            coord = np.unravel_index(i, x0.shape)
            return GradCheckReport(np.inf, False, tuple(int(c) for c in coord),
                                   "non-finite finite-difference evaluation")
        fd = (fp - fm) / (2.0 * step)
        a = analytic.reshape(-1)[i]
        rel = abs(a - fd) / max(abs(a), abs(fd), 1.0)
        if rel > worst:
            worst = rel
            worst_coord = tuple(int(c) for c in np.unravel_index(i, x0.shape))
    return GradCheckReport(worst, worst <= tolerance, worst_coord)
