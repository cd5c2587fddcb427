"""Weighted local polynomial regression on scattered 1D and 2D data.

This is the numerical engine behind every estimator in the package: a kernel
weighted least-squares polynomial fit around each evaluation point whose
nu-th coefficient (times nu!) estimates the nu-th derivative.  Local systems
are solved by singular value decomposition of the weighted design with a
relative cutoff of 1e-10, and windows that hold fewer points than local
coefficients are widened by doubling the bandwidth up to the domain width
before an error is raised.

Duplicate design locations are collapsed exactly (same weighted normal
equations), which makes pooled scatterplots from dense common-grid designs
cheap to smooth.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import factorial

import numpy as np

from .errors import (
    AllDegenerate,
    DegenerateWindow,
    EmptyCandidates,
    RankDeficient,
)

__all__ = [
    "Kernel",
    "ScatterData1D",
    "ScatterData2D",
    "LocalFitSpec",
    "local_poly_1d",
    "local_poly_coefficients_1d",
    "local_poly_weights_1d",
    "local_poly_2d",
    "gcv_scores_1d",
    "gcv_bandwidth_1d",
    "gcv_scores_2d",
    "gcv_bandwidth_2d",
    "bandwidth_candidates",
    "bandwidth_candidates_2d",
]

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))
# relative singular-value cutoff for declaring a local system unsolvable
_SV_RTOL = 1e-10


class Kernel(Enum):
    """Symmetric probability-density kernels."""

    GAUSSIAN = "gaussian"
    EPANECHNIKOV = "epanechnikov"

    def density(self, u):
        u = np.asarray(u, dtype=float)
        if self is Kernel.GAUSSIAN:
            return np.exp(-0.5 * u * u) / _SQRT_2PI
        return np.where(np.abs(u) <= 1.0, 0.75 * np.maximum(0.0, 1.0 - u * u), 0.0)


def _as_weights(w, n):
    if w is None:
        return np.ones(n)
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ValueError("weights must match the number of points")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if not w.sum() > 0:
        raise ValueError("total weight must be positive")
    return w


@dataclass(frozen=True)
class ScatterData1D:
    """Scattered (x, y) observations with nonnegative weights."""

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be equal-length 1D arrays")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("x and y must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", _as_weights(self.w, x.size))

    def __len__(self):
        return self.x.size


@dataclass(frozen=True)
class ScatterData2D:
    """Scattered (s, t, value) observations with nonnegative weights."""

    s: np.ndarray
    t: np.ndarray
    y: np.ndarray
    w: np.ndarray = None

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        t = np.asarray(self.t, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if s.ndim != 1 or s.shape != t.shape or s.shape != y.shape:
            raise ValueError("s, t and y must be equal-length 1D arrays")
        if not all(np.all(np.isfinite(a)) for a in (s, t, y)):
            raise ValueError("s, t and y must be finite")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", _as_weights(self.w, s.size))

    def __len__(self):
        return self.s.size


@dataclass(frozen=True)
class LocalFitSpec:
    """Degree, derivative order, bandwidth and kernel for a local fit."""

    degree: int
    deriv: int = 0
    bandwidth: float | None = None
    kernel: Kernel = Kernel.GAUSSIAN

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        if not 0 <= self.deriv <= self.degree:
            raise ValueError("deriv must satisfy 0 <= deriv <= degree")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")


# ---------------------------------------------------------------------------
# exact aggregation of duplicate design locations


def _aggregate_1d(x, y, w):
    """Collapse duplicate x locations into sufficient statistics.

    Returns (xs, wsum, ybar, n_loc, y_sum, y_sqsum) with xs sorted unique.
    The weighted normal equations of the collapsed data are identical to
    those of the raw data; the extra sums support exact GCV.
    """
    order = np.argsort(x, kind="stable")
    xo, yo, wo = x[order], y[order], w[order]
    new = np.empty(xo.size, dtype=bool)
    new[0] = True
    np.not_equal(xo[1:], xo[:-1], out=new[1:])
    starts = np.flatnonzero(new)
    xs = xo[starts]
    wsum = np.add.reduceat(wo, starts)
    wy = np.add.reduceat(wo * yo, starts)
    n_loc = np.diff(np.append(starts, xo.size))
    y_sum = np.add.reduceat(yo, starts)
    y_sqsum = np.add.reduceat(yo * yo, starts)
    ybar = np.divide(wy, wsum, out=np.zeros_like(wy), where=wsum > 0)
    return xs, wsum, ybar, n_loc, y_sum, y_sqsum


def _aggregate_2d(s, t, y, w):
    """2D analogue of :func:`_aggregate_1d`, collapsing duplicate (s, t)."""
    order = np.lexsort((t, s))
    so, to, yo, wo = s[order], t[order], y[order], w[order]
    new = np.empty(so.size, dtype=bool)
    new[0] = True
    np.logical_or(so[1:] != so[:-1], to[1:] != to[:-1], out=new[1:])
    starts = np.flatnonzero(new)
    ss, ts = so[starts], to[starts]
    wsum = np.add.reduceat(wo, starts)
    wy = np.add.reduceat(wo * yo, starts)
    n_loc = np.diff(np.append(starts, so.size))
    y_sum = np.add.reduceat(yo, starts)
    y_sqsum = np.add.reduceat(yo * yo, starts)
    ybar = np.divide(wy, wsum, out=np.zeros_like(wy), where=wsum > 0)
    return ss, ts, wsum, ybar, n_loc, y_sum, y_sqsum


# ---------------------------------------------------------------------------
# 1D core


def _powers(u, degree):
    # (..., degree+1) stack of u**p built by cumulative multiplication
    out = np.empty(u.shape + (degree + 1,))
    out[..., 0] = 1.0
    for p in range(1, degree + 1):
        out[..., p] = out[..., p - 1] * u
    return out


def _solve_batch(design, sqk, ybar=None):
    """SVD-solve a batch of weighted local systems.

    design : (..., n, p) monomials in scaled offsets
    sqk    : (..., n) square roots of kernel weights
    Returns (coef, ok, svd) where coef is the solution in scaled coordinates
    (or None when ybar is None), ok flags well-posed systems, and svd is the
    (U, s, Vt) triple for weight/hat computations.
    """
    a = design * sqk[..., None]
    u_, s, vt = np.linalg.svd(a, full_matrices=False)
    ok = s[..., -1] > _SV_RTOL * s[..., 0]
    coef = None
    if ybar is not None:
        b = ybar * sqk
        tmp = np.einsum("...np,...n->...p", u_, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            tmp = np.where(s > 0, tmp / np.where(s > 0, s, 1.0), 0.0)
        coef = np.einsum("...pq,...p->...q", vt, tmp)
    return coef, ok, (u_, s, vt)


class _Fit1D:
    """Shared machinery for 1D local fits on aggregated data."""

    def __init__(self, xs, wsum, ybar, degree, kernel, width):
        self.xs = xs
        self.wsum = wsum
        self.ybar = ybar
        self.degree = degree
        self.kernel = kernel
        self.width = width
        self.ncoef = degree + 1

    def _prepare(self, t_eval, h):
        u = (self.xs[None, :] - t_eval[:, None]) / h
        k = self.kernel.density(u) * (self.wsum[None, :] / h)
        in_window = np.count_nonzero((np.abs(u) <= 1.0) & (self.wsum[None, :] > 0), axis=1)
        design = _powers(u, self.degree)
        return k, in_window, design

    def solve_at(self, t_eval, h, need_hat=False, need_weights=False, deriv_for_weights=0):
        """Fit at each eval point with per-point bandwidth widening.

        Returns a dict with scaled coefficients ``coef`` (E, p+1), the
        bandwidth actually used per point ``h_used`` (E,), optionally the
        local hat factor ``hat_q`` (E,) and smoother weight rows (E, N).
        """
        t_eval = np.asarray(t_eval, dtype=float)
        e = t_eval.size
        coef = np.zeros((e, self.ncoef))
        h_used = np.full(e, h)
        hat_q = np.zeros(e) if need_hat else None
        wrows = np.zeros((e, self.xs.size)) if need_weights else None

        k, in_window, design = self._prepare(t_eval, h)
        sqk = np.sqrt(k)
        c, ok, (u_, s, vt) = _solve_batch(design, sqk, self.ybar)
        ok &= in_window >= self.ncoef
        coef[ok] = c[ok]
        if need_hat:
            with np.errstate(divide="ignore"):
                inv_s2 = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0) ** 2, 0.0)
            hat_q[ok] = np.einsum("ep,ep->e", vt[..., 0] ** 2, inv_s2)[ok]
        if need_weights:
            nu = deriv_for_weights
            with np.errstate(divide="ignore"):
                inv_s = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)
            rows = np.einsum("ep,enp->en", vt[:, :, nu] * inv_s, u_) * sqk
            wrows[ok] = (factorial(nu) / h**nu) * rows[ok]

        for idx in np.flatnonzero(~ok):
            self._solve_single(
                float(t_eval[idx]), h, idx, coef, h_used, hat_q, wrows, deriv_for_weights
            )
        return {"coef": coef, "h_used": h_used, "hat_q": hat_q, "weights": wrows}

    def _solve_single(self, t0, h, idx, coef, h_used, hat_q, wrows, nu):
        h_try = h
        while True:
            h_try = min(2.0 * h_try, self.width)
            k, in_window, design = self._prepare(np.array([t0]), h_try)
            if in_window[0] >= self.ncoef:
                sqk = np.sqrt(k)
                c, ok, (u_, s, vt) = _solve_batch(design, sqk, self.ybar)
                if ok[0]:
                    coef[idx] = c[0]
                    h_used[idx] = h_try
                    if hat_q is not None:
                        hat_q[idx] = float(np.sum(vt[0, :, 0] ** 2 / s[0] ** 2))
                    if wrows is not None:
                        rows = np.einsum("p,np->n", vt[0, :, nu] / s[0], u_[0]) * sqk[0]
                        wrows[idx] = (factorial(nu) / h_try**nu) * rows
                    return
            if h_try >= self.width:
                raise DegenerateWindow(
                    f"no solvable window at t={t0:g} for bandwidths up to the domain width"
                )


def _domain_width_1d(x, eval_points):
    lo = min(float(np.min(x)), float(np.min(eval_points)))
    hi = max(float(np.max(x)), float(np.max(eval_points)))
    return max(hi - lo, 1e-12 * (1.0 + abs(hi) + abs(lo)))


def local_poly_1d(data: ScatterData1D, spec: LocalFitSpec, eval_points) -> np.ndarray:
    """Local polynomial fit of scattered data, returning nu! * alpha_nu.

    The fit at each evaluation point minimizes the kernel-weighted least
    squares criterion over polynomials of the requested degree; the result is
    exact for noiseless polynomial data of degree <= ``spec.degree``.
    """
    if spec.bandwidth is None:
        raise ValueError("spec.bandwidth is required")
    eval_points = np.asarray(eval_points, dtype=float)
    xs, wsum, ybar, *_ = _aggregate_1d(data.x, data.y, data.w)
    fit = _Fit1D(xs, wsum, ybar, spec.degree, spec.kernel, _domain_width_1d(data.x, eval_points))
    res = fit.solve_at(eval_points, spec.bandwidth)
    nu = spec.deriv
    return factorial(nu) * res["coef"][:, nu] / res["h_used"] ** nu


def local_poly_coefficients_1d(
    data: ScatterData1D,
    degree: int,
    bandwidth: float,
    kernel: Kernel,
    eval_points,
    derivs: tuple[int, ...] = (0,),
) -> list[np.ndarray]:
    """Several derivative orders from a single local fit per eval point."""
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    if any(not 0 <= nu <= degree for nu in derivs):
        raise ValueError("derivative orders must satisfy 0 <= nu <= degree")
    eval_points = np.asarray(eval_points, dtype=float)
    xs, wsum, ybar, *_ = _aggregate_1d(data.x, data.y, data.w)
    fit = _Fit1D(xs, wsum, ybar, degree, kernel, _domain_width_1d(data.x, eval_points))
    res = fit.solve_at(eval_points, bandwidth)
    return [factorial(nu) * res["coef"][:, nu] / res["h_used"] ** nu for nu in derivs]


def local_poly_weights_1d(x, w, spec: LocalFitSpec, eval_points) -> np.ndarray:
    """Rows of the linear smoother: values = weights @ y for any response y.

    The rows already include the nu! / h**nu factor, so applying them to a
    response vector reproduces :func:`local_poly_1d` on the same design.
    Duplicate x locations are not collapsed here; pass unique locations.
    """
    if spec.bandwidth is None:
        raise ValueError("spec.bandwidth is required")
    x = np.asarray(x, dtype=float)
    if np.unique(x).size != x.size:
        raise ValueError("weight rows require distinct design locations")
    eval_points = np.asarray(eval_points, dtype=float)
    order = np.argsort(x, kind="stable")
    w = _as_weights(w, x.size)[order]
    fit = _Fit1D(
        x[order], w, np.zeros_like(w), spec.degree, spec.kernel,
        _domain_width_1d(x, eval_points),
    )
    res = fit.solve_at(
        eval_points, spec.bandwidth, need_weights=True, deriv_for_weights=spec.deriv
    )
    rows = np.empty_like(res["weights"])
    rows[:, order] = res["weights"]
    return rows


# ---------------------------------------------------------------------------
# 2D core


def monomial_exponents(total_degree: int) -> list[tuple[int, int]]:
    """Exponent pairs (p, q) with p + q <= total_degree, by total degree."""
    return [(p, d - p) for d in range(total_degree + 1) for p in range(d, -1, -1)]


class _Fit2D:
    def __init__(self, ss, ts, wsum, ybar, total_degree, kernel, width):
        self.ss = ss
        self.ts = ts
        self.wsum = wsum
        self.ybar = ybar
        self.total_degree = total_degree
        self.kernel = kernel
        self.width = width
        self.exponents = monomial_exponents(total_degree)
        self.ncoef = len(self.exponents)

    def _prepare(self, s_eval, t_eval, h):
        us = (self.ss[None, :] - s_eval[:, None]) / h
        ut = (self.ts[None, :] - t_eval[:, None]) / h
        k = self.kernel.density(us) * self.kernel.density(ut) * (self.wsum[None, :] / h**2)
        in_window = np.count_nonzero(
            (np.abs(us) <= 1.0) & (np.abs(ut) <= 1.0) & (self.wsum[None, :] > 0), axis=1
        )
        ps = _powers(us, self.total_degree)
        pt = _powers(ut, self.total_degree)
        design = np.empty(us.shape + (self.ncoef,))
        for j, (p, q) in enumerate(self.exponents):
            design[..., j] = ps[..., p] * pt[..., q]
        return k, in_window, design

    def solve_at(self, s_eval, t_eval, h, need_hat=False):
        s_eval = np.asarray(s_eval, dtype=float)
        t_eval = np.asarray(t_eval, dtype=float)
        e = s_eval.size
        coef = np.zeros((e, self.ncoef))
        h_used = np.full(e, h)
        hat_q = np.zeros(e) if need_hat else None

        # chunk so the (chunk, n, ncoef) design stays modest in memory
        chunk = max(1, int(2_000_000 / max(1, self.ss.size * self.ncoef)))
        for lo in range(0, e, chunk):
            sl = slice(lo, min(lo + chunk, e))
            k, in_window, design = self._prepare(s_eval[sl], t_eval[sl], h)
            sqk = np.sqrt(k)
            c, ok, (u_, s, vt) = _solve_batch(design, sqk, self.ybar)
            ok &= in_window >= self.ncoef
            coef[sl][ok] = c[ok]
            if need_hat:
                with np.errstate(divide="ignore"):
                    inv_s2 = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0) ** 2, 0.0)
                hq = np.einsum("ep,ep->e", vt[..., 0] ** 2, inv_s2)
                hat_q[sl][ok] = hq[ok]
            bad = np.flatnonzero(~ok) + lo
            for idx in bad:
                self._solve_single(
                    float(s_eval[idx]), float(t_eval[idx]), h, idx, coef, h_used, hat_q
                )
        return {"coef": coef, "h_used": h_used, "hat_q": hat_q}

    def _solve_single(self, s0, t0, h, idx, coef, h_used, hat_q):
        h_try = h
        enough_points = False
        while True:
            h_try = min(2.0 * h_try, self.width)
            k, in_window, design = self._prepare(np.array([s0]), np.array([t0]), h_try)
            if in_window[0] >= self.ncoef:
                enough_points = True
                c, ok, (u_, s, vt) = _solve_batch(design, np.sqrt(k), self.ybar)
                if ok[0]:
                    coef[idx] = c[0]
                    h_used[idx] = h_try
                    if hat_q is not None:
                        hat_q[idx] = float(np.sum(vt[0, :, 0] ** 2 / s[0] ** 2))
                    return
            if h_try >= self.width:
                if enough_points:
                    raise RankDeficient(
                        f"singular local design at (s, t)=({s0:g}, {t0:g}) "
                        "for all bandwidths up to the domain width"
                    )
                raise DegenerateWindow(
                    f"no solvable window at (s, t)=({s0:g}, {t0:g}) "
                    "for bandwidths up to the domain width"
                )


def _domain_width_2d(s, t, eval_s, eval_t):
    ws = _domain_width_1d(s, eval_s)
    wt = _domain_width_1d(t, eval_t)
    return max(ws, wt)


def local_poly_2d(
    data: ScatterData2D,
    total_degree: int,
    target: tuple[int, int],
    bandwidth: float,
    kernel: Kernel,
    eval_grid,
) -> np.ndarray:
    """2D local polynomial fit returning p! * q! * alpha_pq on grid x grid.

    ``target=(p, q)`` selects the coefficient of (s_i - s)^p (t_i - t)^q; with
    ``total_degree=3`` and target (1, 1) this estimates the mixed partial
    derivative of the underlying surface.  Output index [a, b] corresponds to
    (s, t) = (grid[a], grid[b]).
    """
    p, q = target
    if p < 0 or q < 0 or p + q > total_degree:
        raise ValueError("target exponents must satisfy p + q <= total_degree")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    grid = np.asarray(eval_grid, dtype=float)
    ss, ts, wsum, ybar, *_ = _aggregate_2d(data.s, data.t, data.y, data.w)
    fit = _Fit2D(
        ss, ts, wsum, ybar, total_degree, kernel,
        _domain_width_2d(data.s, data.t, grid, grid),
    )
    se, te = np.meshgrid(grid, grid, indexing="ij")
    res = fit.solve_at(se.ravel(), te.ravel(), bandwidth)
    j = fit.exponents.index((p, q))
    vals = factorial(p) * factorial(q) * res["coef"][:, j] / res["h_used"] ** (p + q)
    return vals.reshape(grid.size, grid.size)


# ---------------------------------------------------------------------------
# GCV bandwidth selection


def _gcv_from_fit(k0_over_h, wsum, hat_q, yhat, n_loc, y_sum, y_sqsum):
    # residual sum over raw points, using exact per-location sufficient stats
    rss_loc = y_sqsum - 2.0 * yhat * y_sum + n_loc * yhat**2
    rss = float(np.sum(np.maximum(rss_loc, 0.0)))
    trace = float(np.sum(k0_over_h * wsum * hat_q))
    n = float(np.sum(n_loc))
    denom = n - trace
    if denom <= 0:
        return np.inf
    return n * rss / denom**2


def gcv_scores_1d(data: ScatterData1D, spec: LocalFitSpec, candidates) -> np.ndarray:
    """GCV(h) = N RSS(h) / (N - tr H_h)^2 for each candidate bandwidth.

    The hat-matrix trace is accumulated exactly from the local smoother
    weights at the design points; candidates whose windows cannot be fit
    anywhere score infinity.
    """
    candidates = np.asarray(candidates, dtype=float)
    if candidates.size == 0:
        raise EmptyCandidates("no bandwidth candidates given")
    xs, wsum, ybar, n_loc, y_sum, y_sqsum = _aggregate_1d(data.x, data.y, data.w)
    fit = _Fit1D(xs, wsum, ybar, spec.degree, spec.kernel, _domain_width_1d(data.x, xs))
    k0 = float(spec.kernel.density(0.0))
    scores = np.empty(candidates.size)
    for i, h in enumerate(candidates):
        if not h > 0:
            raise ValueError("bandwidth candidates must be positive")
        try:
            res = fit.solve_at(xs, float(h), need_hat=True)
        except DegenerateWindow:
            scores[i] = np.inf
            continue
        yhat = res["coef"][:, 0]
        scores[i] = _gcv_from_fit(
            k0 / res["h_used"], wsum, res["hat_q"], yhat, n_loc, y_sum, y_sqsum
        )
    return scores


def _smallest_near_min(candidates, scores):
    # ties (within floating noise of the minimum) go to the smallest candidate
    finite = np.isfinite(scores)
    best = float(np.min(scores[finite]))
    tol = 1e-10 * (1.0 + abs(best))
    return float(candidates[np.flatnonzero(finite & (scores <= best + tol))[0]])


def gcv_bandwidth_1d(data: ScatterData1D, spec: LocalFitSpec, candidates) -> float:
    """Candidate bandwidth minimizing GCV; ties go to the smallest."""
    candidates = np.sort(np.asarray(candidates, dtype=float))
    scores = gcv_scores_1d(data, spec, candidates)
    if not np.any(np.isfinite(scores)):
        raise AllDegenerate("every bandwidth candidate failed the window precondition")
    return _smallest_near_min(candidates, scores)


def gcv_scores_2d(data: ScatterData2D, total_degree: int, kernel: Kernel, candidates) -> np.ndarray:
    """GCV scores for the 2D local polynomial surface smoother."""
    candidates = np.asarray(candidates, dtype=float)
    if candidates.size == 0:
        raise EmptyCandidates("no bandwidth candidates given")
    ss, ts, wsum, ybar, n_loc, y_sum, y_sqsum = _aggregate_2d(data.s, data.t, data.y, data.w)
    fit = _Fit2D(ss, ts, wsum, ybar, total_degree, kernel, _domain_width_2d(data.s, data.t, ss, ts))
    k0sq = float(kernel.density(0.0)) ** 2
    scores = np.empty(candidates.size)
    for i, h in enumerate(candidates):
        if not h > 0:
            raise ValueError("bandwidth candidates must be positive")
        try:
            res = fit.solve_at(ss, ts, float(h), need_hat=True)
        except (DegenerateWindow, RankDeficient):
            scores[i] = np.inf
            continue
        yhat = res["coef"][:, 0]
        scores[i] = _gcv_from_fit(
            k0sq / res["h_used"] ** 2, wsum, res["hat_q"], yhat, n_loc, y_sum, y_sqsum
        )
    return scores


def gcv_bandwidth_2d(data: ScatterData2D, total_degree: int, kernel: Kernel, candidates) -> float:
    candidates = np.sort(np.asarray(candidates, dtype=float))
    scores = gcv_scores_2d(data, total_degree, kernel, candidates)
    if not np.any(np.isfinite(scores)):
        raise AllDegenerate("every bandwidth candidate failed the window precondition")
    return _smallest_near_min(candidates, scores)


def bandwidth_candidates(x, degree: int, num: int = 8, floor_factor: float = 0.75) -> np.ndarray:
    """Geometric bandwidth grid adapted to the design density.

    The lower end is set by the sparsest stretch of ``degree + 1``
    consecutive distinct locations (so typical windows are solvable) and the
    upper end by a quarter of the design range.
    """
    xs = np.unique(np.asarray(x, dtype=float))
    span = xs[-1] - xs[0]
    if xs.size < degree + 2 or span <= 0:
        raise ValueError("not enough distinct locations for candidate generation")
    lag = degree + 1
    gap = float(np.max(xs[lag:] - xs[:-lag]))
    h_hi = span / 4.0
    h_lo = min(max(floor_factor * gap, span / 200.0), h_hi)
    if h_hi / h_lo < 1.0 + 1e-12:
        return np.array([h_hi])
    return np.geomspace(h_lo, h_hi, num)


def bandwidth_candidates_2d(s, t, total_degree: int, num: int = 6) -> np.ndarray:
    """Geometric bandwidth grid for surface smoothing.

    The lower end guarantees well-populated local windows everywhere the
    surface will be evaluated: probe points on a coarse grid over the design
    rectangle measure the sup-norm distance to enough neighbours to
    determine the local polynomial, and the floor is the largest such
    radius (the sparsest region governs).
    """
    from scipy.spatial import cKDTree

    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    pts = np.column_stack([s, t])
    span = max(s.max() - s.min(), t.max() - t.min())
    if span <= 0:
        raise ValueError("degenerate design for candidate generation")
    h_hi = span / 4.0
    ncoef = (total_degree + 1) * (total_degree + 2) // 2
    k = min(pts.shape[0], 2 * ncoef)
    ps = np.linspace(s.min(), s.max(), 15)
    pt = np.linspace(t.min(), t.max(), 15)
    probe = np.column_stack([a.ravel() for a in np.meshgrid(ps, pt, indexing="ij")])
    dist, _ = cKDTree(pts).query(probe, k=k, p=np.inf)
    h_lo = min(max(float(np.max(dist[:, -1])), span / 200.0), h_hi)
    if h_hi / h_lo < 1.0 + 1e-12:
        return np.array([h_hi])
    return np.geomspace(h_lo, h_hi, num)
