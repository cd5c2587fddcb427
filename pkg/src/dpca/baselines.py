"""Per-curve derivative estimators for densely sampled trajectories.

These serve as comparison methods: difference quotients, local linear
smoothing of the difference quotients, direct local quadratic derivative
estimation on each curve, and the trivial population-mean-derivative
predictor.  They are refused for curves with fewer than three points rather
than silently degraded, since individual smoothing is only sensible for
dense designs.
"""

from __future__ import annotations

import numpy as np

from .data import GridFunction
from .errors import EmptyCandidates, TooFewPoints
from .smoothing import (
    Kernel,
    LocalFitSpec,
    ScatterData1D,
    local_poly_1d,
    local_poly_weights_1d,
)

__all__ = [
    "difference_quotients",
    "smooth_dq",
    "local_deriv",
    "cv_bandwidth_dq",
    "mean_derivative_baseline",
]


def difference_quotients(times, values) -> tuple[np.ndarray, np.ndarray]:
    """First-order difference quotients placed at interval midpoints."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 2:
        raise TooFewPoints("difference quotients need at least 2 points")
    dt = np.diff(times)
    quotients = np.diff(values) / dt
    midpoints = times[:-1] + 0.5 * dt
    return midpoints, quotients


def smooth_dq(times, values, bandwidth: float, kernel: Kernel = Kernel.GAUSSIAN, eval_grid=None) -> GridFunction:
    """Local linear smooth of the difference quotients."""
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise TooFewPoints("smoothed difference quotients need at least 3 points")
    mid, dq = difference_quotients(times, values)
    grid = np.asarray(eval_grid, dtype=float)
    vals = local_poly_1d(ScatterData1D(mid, dq), LocalFitSpec(1, 0, bandwidth, kernel), grid)
    return GridFunction(grid, vals)


def local_deriv(times, values, bandwidth: float, kernel: Kernel = Kernel.GAUSSIAN, eval_grid=None) -> GridFunction:
    """Local quadratic derivative estimate from a single curve."""
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise TooFewPoints("local quadratic derivative needs at least 3 points")
    grid = np.asarray(eval_grid, dtype=float)
    vals = local_poly_1d(
        ScatterData1D(times, np.asarray(values, dtype=float)),
        LocalFitSpec(2, 1, bandwidth, kernel),
        grid,
    )
    return GridFunction(grid, vals)


def _holdout_rows(x, h, spec_degree, spec_deriv, kernel, mid, drop):
    """Leave-out smoother rows: row j predicts location mid[j] from x minus
    the dropped indices.  Depends only on the design, so rows are reusable
    across curves sharing one time grid."""
    rows = np.zeros((mid.size, x.size))
    spec = LocalFitSpec(spec_degree, spec_deriv, h, kernel)
    for j, m in enumerate(mid):
        keep = np.ones(x.size, dtype=bool)
        keep[list(drop(j))] = False
        rows[j, keep] = local_poly_weights_1d(x[keep], None, spec, np.array([m]))[0]
    return rows


def cv_bandwidth_dq(curves, method: str, candidates, kernel: Kernel = Kernel.GAUSSIAN) -> float:
    """Cross-validated bandwidth for the per-curve derivative estimators.

    Each raw difference quotient is predicted by the derivative estimate
    built without the observations that form it (for the local quadratic,
    the two endpoint measurements; for quotient smoothing, the quotient
    itself); the score is the squared deviation averaged over quotients and
    curves.  Ties go to the smallest candidate.
    """
    if method not in ("local", "smooth_dq"):
        raise ValueError("method must be 'local' or 'smooth_dq'")
    candidates = np.sort(np.asarray(candidates, dtype=float))
    if candidates.size == 0:
        raise EmptyCandidates("no bandwidth candidates given")
    curves = [(np.asarray(t, dtype=float), np.asarray(y, dtype=float)) for t, y in curves]
    if not curves:
        raise ValueError("no curves given")
    for t, _ in curves:
        if t.size < 3:
            raise TooFewPoints("per-curve methods need at least 3 points")
    shared = all(np.array_equal(t, curves[0][0]) for t, _ in curves)
    scores = np.zeros(candidates.size)
    row_cache: dict[int, np.ndarray] = {}
    for times, values in curves:
        mid, dq = difference_quotients(times, values)
        for ci, h in enumerate(candidates):
            rows = row_cache.get(ci)
            if rows is None:
                if method == "local":
                    rows = _holdout_rows(times, h, 2, 1, kernel, mid, lambda j: (j, j + 1))
                else:
                    rows = _holdout_rows(mid, h, 1, 0, kernel, mid, lambda j: (j,))
                if shared:
                    row_cache[ci] = rows
            est = rows @ (values if method == "local" else dq)
            scores[ci] += float(np.mean((est - dq) ** 2))
    scores /= len(curves)
    best = float(np.min(scores))
    tol = 1e-10 * (1.0 + abs(best))
    return float(candidates[np.flatnonzero(scores <= best + tol)[0]])


def mean_derivative_baseline(mean_deriv: GridFunction, n_subjects: int) -> np.ndarray:
    """Every subject's derivative predicted by the population mean derivative."""
    return np.tile(mean_deriv.values, (n_subjects, 1))
