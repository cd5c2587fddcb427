"""Pooled mean/covariance estimation, eigendecomposition and BLUP scores.

These are the building blocks of functional principal component analysis for
sparse or dense designs: a local quadratic fit of the pooled scatterplot
yields the mean and its derivative, residual cross-products feed a 2D local
linear surface smoother, the measurement-error variance comes from the
smoothed diagonal, and per-subject component scores are best linear unbiased
predictions from the subject's own noisy observations.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .data import EigenSystem, GridFunction, GridSurface, trapezoid_weights
from .errors import (
    DimensionMismatch,
    NoPairs,
    SingularCovariance,
    ZeroEigenvalue,
)
from .smoothing import (
    Kernel,
    ScatterData1D,
    ScatterData2D,
    local_poly_2d,
    local_poly_coefficients_1d,
)

__all__ = [
    "estimate_mean_and_derivative",
    "raw_covariances",
    "estimate_cov_surface",
    "estimate_noise_variance",
    "eigensystem",
    "observation_covariance",
    "trajectory_scores",
    "eigenfunction_derivative",
    "reconstruct_derivatives",
]

# eigenvalues below EIG_RTOL * lambda_1 are dropped
EIG_RTOL = 1e-12
# per-subject covariance matrices above this condition number are refused
MAX_CONDITION = 1e12


def pooled_scatter(data) -> ScatterData1D:
    """All observations with equal weight 1/N per observation."""
    t, y = data.pooled()
    return ScatterData1D(t, y, np.full(t.size, 1.0 / t.size))


def estimate_mean_and_derivative(
    data, bandwidth: float, kernel: Kernel = Kernel.GAUSSIAN, grid=None
) -> tuple[GridFunction, GridFunction]:
    """Local quadratic fit of the pooled scatterplot.

    One weighted degree-2 fit per grid point supplies both the mean (the
    constant coefficient) and its first derivative (the linear coefficient).
    """
    grid = np.asarray(grid, dtype=float)
    scatter = pooled_scatter(data)
    mean_vals, deriv_vals = local_poly_coefficients_1d(
        scatter, 2, bandwidth, kernel, grid, derivs=(0, 1)
    )
    return GridFunction(grid, mean_vals), GridFunction(grid, deriv_vals)


def raw_covariances(data, mean: GridFunction) -> ScatterData2D:
    """Residual cross-products for all ordered within-subject pairs.

    For every subject and every ordered pair j != l the point
    ``(T_j, T_l, r_j * r_l)`` is emitted, where ``r`` are residuals from the
    interpolated mean; each point carries weight 1 / sum_i N_i (N_i - 1).
    Subjects with a single observation contribute nothing.
    """
    counts = data.counts
    n_pairs = int(np.sum(counts * (counts - 1)))
    if n_pairs == 0:
        raise NoPairs("no subject has two or more observations")
    ss = np.empty(n_pairs)
    tt = np.empty(n_pairs)
    vals = np.empty(n_pairs)
    pos = 0
    for t, y in zip(data.times, data.values):
        m = t.size
        if m < 2:
            continue
        r = y - mean(t)
        prod = np.outer(r, r)
        off = ~np.eye(m, dtype=bool)
        k = m * (m - 1)
        ss[pos : pos + k] = np.broadcast_to(t[:, None], (m, m))[off]
        tt[pos : pos + k] = np.broadcast_to(t[None, :], (m, m))[off]
        vals[pos : pos + k] = prod[off]
        pos += k
    w = np.full(n_pairs, 1.0 / n_pairs)
    return ScatterData2D(ss, tt, vals, w)


def estimate_cov_surface(
    raw: ScatterData2D, bandwidth: float, kernel: Kernel = Kernel.GAUSSIAN, grid=None
) -> GridSurface:
    """Local linear smooth of the raw covariances, symmetrized."""
    grid = np.asarray(grid, dtype=float)
    vals = local_poly_2d(raw, 1, (0, 0), bandwidth, kernel, grid)
    return GridSurface(grid, vals).symmetrized()


def estimate_noise_variance(
    data, mean: GridFunction, cov: GridSurface,
    bandwidth: float, kernel: Kernel = Kernel.GAUSSIAN,
) -> float:
    """Measurement-error variance from the smoothed diagonal.

    The pooled squared residuals are smoothed by a local linear fit; the
    estimate averages (total variance - covariance diagonal) over the central
    half of the domain and is clamped at zero.
    """
    grid = cov.grid
    t, y = data.pooled()
    resid_sq = (y - mean(t)) ** 2
    scatter = ScatterData1D(t, resid_sq, np.full(t.size, 1.0 / t.size))
    (total_var,) = local_poly_coefficients_1d(scatter, 1, bandwidth, kernel, grid, derivs=(0,))
    width = grid[-1] - grid[0]
    central = (grid >= grid[0] + width / 4) & (grid <= grid[-1] - width / 4)
    if np.count_nonzero(central) < 2:
        central = np.ones_like(central)
    excess = total_var[central] - cov.diagonal()[central]
    tc = grid[central]
    mean_excess = np.trapezoid(excess, tc) / (tc[-1] - tc[0])
    return float(max(0.0, mean_excess))


def eigensystem(
    surface: GridSurface, asym_tol: float = 1e-8, min_eigenvalue: float = 0.0
) -> EigenSystem:
    """Quadrature-weighted spectral decomposition of a symmetric surface.

    Solves W^(1/2) S W^(1/2) u = lambda u with W the diagonal of trapezoid
    weights, maps eigenvectors back by phi = W^(-1/2) u (so eigenfunctions
    are quadrature-orthonormal), drops eigenvalues at or below
    max(min_eigenvalue, 1e-12 * lambda_1), and fixes signs so each
    eigenfunction has positive integral (positive left endpoint value when
    the integral vanishes).  ``min_eigenvalue`` supplies an absolute scale;
    without one a numerically-zero surface would keep its roundoff spectrum.
    """
    surface.require_symmetric(asym_tol)
    grid = surface.grid
    qw = trapezoid_weights(grid)
    sq = np.sqrt(qw)
    b = sq[:, None] * surface.values * sq[None, :]
    lam, vec = scipy.linalg.eigh(0.5 * (b + b.T))
    lam = lam[::-1]
    vec = vec[:, ::-1]
    if lam.size == 0 or lam[0] <= max(0.0, min_eigenvalue):
        return EigenSystem(grid, np.empty(0), np.empty((grid.size, 0)))
    keep = lam > max(min_eigenvalue, EIG_RTOL * lam[0])
    lam = lam[keep]
    phi = vec[:, keep] / sq[:, None]
    integrals = qw @ phi
    for k in range(lam.size):
        s = integrals[k]
        if abs(s) <= 1e-8:
            s = phi[0, k]
        if s < 0:
            phi[:, k] = -phi[:, k]
    return EigenSystem(grid, lam, phi)


def observation_covariance(cov: GridSurface, sigma2: float, times) -> np.ndarray:
    """Ridged covariance of one subject's observation vector.

    Built from the fitted surface by bilinear interpolation at all time
    pairs, plus (sigma2 + ridge) on the diagonal; the ridge keeps dense
    designs with vanishing noise solvable.
    """
    times = np.asarray(times, dtype=float)
    tj, tl = np.meshgrid(times, times, indexing="ij")
    mat = cov.value_at(tj.ravel(), tl.ravel()).reshape(times.size, times.size)
    mat = 0.5 * (mat + mat.T)
    ridge = max(1e-8, 1e-6 * float(np.max(np.abs(cov.values))))
    mat[np.diag_indices_from(mat)] += sigma2 + ridge
    return mat


def _solve_observation_system(sigma_y, resid, subject_id):
    try:
        cond = np.linalg.cond(sigma_y)
    except np.linalg.LinAlgError:  # pragma: no cover
        cond = np.inf
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularCovariance(
            f"subject {subject_id}: observation covariance condition {cond:.2e} "
            f"exceeds {MAX_CONDITION:.0e}"
        )
    return np.linalg.solve(sigma_y, resid)


def trajectory_scores(
    data, mean: GridFunction, cov: GridSurface, sigma2: float,
    eig: EigenSystem, n_components: int,
) -> np.ndarray:
    """BLUP trajectory component scores, one row per subject.

    Score k is lambda_k phi_k(T_i)^T Sigma_i^{-1} (Y_i - mu(T_i)).
    """
    if n_components > len(eig):
        raise DimensionMismatch(
            f"requested {n_components} components but only {len(eig)} retained"
        )
    if n_components == 0:
        return np.empty((data.n_subjects, 0))
    lam = eig.eigenvalues[:n_components]
    scores = np.empty((data.n_subjects, n_components))
    for i, (t, y) in enumerate(zip(data.times, data.values)):
        sigma_y = observation_covariance(cov, sigma2, t)
        x = _solve_observation_system(sigma_y, y - mean(t), data.subject_ids[i])
        phi_at = np.column_stack(
            [np.interp(t, eig.grid, eig.eigenfunctions[:, k]) for k in range(n_components)]
        )
        scores[i] = lam * (phi_at.T @ x)
    return scores


def eigenfunction_derivative(cross_cov: GridSurface, eig: EigenSystem, k: int) -> GridFunction:
    """Derivative of the k-th trajectory eigenfunction (0-based).

    Computed as (1/lambda_k) * integral of dG/ds(s, .) transposed against
    phi_k, by trapezoid quadrature on the grid.
    """
    if k >= len(eig):
        raise ZeroEigenvalue(f"component {k} not retained")
    lam = eig.eigenvalues[k]
    if lam <= 0:
        raise ZeroEigenvalue(f"component {k} has nonpositive eigenvalue")
    qw = trapezoid_weights(eig.grid)
    # d/dt of the eigenequation: values[a, b] = dG/ds at (grid[a], grid[b]),
    # and dG/dt(s, t) = dG/ds(t, s) by symmetry of G
    vals = cross_cov.values @ (qw * eig.eigenfunctions[:, k]) / lam
    return GridFunction(eig.grid, vals)


def reconstruct_derivatives(
    mean_deriv: GridFunction, scores: np.ndarray, components: np.ndarray, n_components: int
) -> np.ndarray:
    """Derivative trajectories mean' + sum_k score_k * component_k.

    Works for both representations: trajectory scores with eigenfunction
    derivatives, or derivative scores with derivative eigenfunctions.
    Returns one row per subject on the grid.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    components = np.asarray(components, dtype=float)
    if n_components > scores.shape[1] or n_components > components.shape[1]:
        raise DimensionMismatch("n_components exceeds available scores or components")
    if components.shape[0] != mean_deriv.grid.size:
        raise DimensionMismatch("components must live on the mean-derivative grid")
    return mean_deriv.values[None, :] + scores[:, :n_components] @ components[:, :n_components].T
