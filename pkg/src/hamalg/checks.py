"""Residual evaluation and check records shared by all checkers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .expr import as_expr
from .tape import Tape


@dataclass
class CheckResult:
    check_id: str
    anchor: str
    passed: bool
    max_residual: float
    worst_point: list | None
    tolerance: float
    samples: int
    status: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            self.status = "pass" if self.passed else "fail"

    def __bool__(self):
        return self.passed


def sample_points(d, n=64, box=(-2.0, 2.0), seed=42) -> np.ndarray:
    """Scrambled Sobol points in ``box**d`` (a prefix of the next power of two)."""
    lo, hi = box
    eng = qmc.Sobol(d=d, scramble=True, seed=seed)
    u = eng.random_base2(max(0, int(n - 1).bit_length()))[:n]
    return lo + (hi - lo) * u


def residual(exprs, names, points):
    """Max |expr| over all expressions and points, with the worst point.

    Non-finite values count as infinite residuals.
    """
    exprs = [as_expr(e) for e in exprs]
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if not exprs or pts.shape[0] == 0:
        return 0.0, None
    vals = np.abs(Tape(exprs, names).eval(pts))
    vals = np.where(np.isfinite(vals), vals, np.inf)
    per_point = vals.max(axis=1)
    k = int(np.argmax(per_point))
    return float(per_point[k]), [float(v) for v in pts[k]]


def make_check(check_id, anchor, exprs, names, points, tol, **details) -> CheckResult:
    m, worst = residual(exprs, names, points)
    return CheckResult(check_id, anchor, m < tol, m, worst, tol, len(points), details=details)


def from_value(check_id, anchor, value, tol, samples=0, worst=None, **details) -> CheckResult:
    value = float(value)
    return CheckResult(check_id, anchor, bool(value < tol), value, worst, tol, samples,
                       details=details)
