"""Independent brute-force oracles used across the test suite.

These deliberately avoid the library's smoothing/score code paths: local
fits are dense weighted least squares via lstsq on the raw design, GCV is
assembled from explicit per-point smoother weight vectors, and BLUP scores
come from a direct matrix build-and-solve.
"""

import math

import numpy as np

SQRT_2PI = np.sqrt(2.0 * np.pi)


def kernel_value(u, kind="gaussian"):
    u = np.asarray(u, dtype=float)
    if kind == "gaussian":
        return np.exp(-0.5 * u * u) / SQRT_2PI
    return np.where(np.abs(u) <= 1.0, 0.75 * np.maximum(0.0, 1.0 - u * u), 0.0)


def wls_local_1d(x, y, w, t0, h, degree, deriv, kind="gaussian"):
    """nu! * alpha_nu from an explicit weighted least-squares solve."""
    x = np.asarray(x, float)
    k = kernel_value((x - t0) / h, kind) / h * np.asarray(w, float)
    design = np.vander(x - t0, degree + 1, increasing=True)
    sw = np.sqrt(k)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], np.asarray(y, float) * sw, rcond=None)
    return float(math.factorial(deriv) * coef[deriv])


def smoother_weight_row_1d(x, w, t0, h, degree, deriv, kind="gaussian"):
    """Explicit weight vector l with fit(t0) = l @ y."""
    x = np.asarray(x, float)
    k = kernel_value((x - t0) / h, kind) / h * np.asarray(w, float)
    design = np.vander(x - t0, degree + 1, increasing=True)
    m = design.T @ (design * k[:, None])
    row = np.linalg.solve(m, design.T * k[None, :])[deriv]
    return math.factorial(deriv) * row


def gcv_score_1d(x, y, w, h, degree, kind="gaussian"):
    """N RSS / (N - tr H)^2 from explicit per-point smoother weights."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = x.size
    yhat = np.empty(n)
    trace = 0.0
    for i in range(n):
        row = smoother_weight_row_1d(x, w, x[i], h, degree, 0, kind)
        yhat[i] = row @ y
        trace += row[i]
    rss = float(np.sum((y - yhat) ** 2))
    return n * rss / (n - trace) ** 2


def wls_local_2d(s, t, y, w, s0, t0, total_degree, target, h, kind="gaussian"):
    """p! q! * alpha_pq from an explicit 2D weighted least-squares solve."""
    s = np.asarray(s, float)
    t = np.asarray(t, float)
    k = (
        kernel_value((s - s0) / h, kind)
        * kernel_value((t - t0) / h, kind)
        / h**2
        * np.asarray(w, float)
    )
    exps = [(p, d - p) for d in range(total_degree + 1) for p in range(d, -1, -1)]
    design = np.column_stack([(s - s0) ** p * (t - t0) ** q for p, q in exps])
    sw = np.sqrt(k)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], np.asarray(y, float) * sw, rcond=None)
    p, q = target
    return float(math.factorial(p) * math.factorial(q) * coef[exps.index((p, q))])


def blup_scores(times, values, mean_at_times, cov_at_pairs, noise_diag, cov_vectors):
    """Direct assembly-and-solve BLUP: cov_vectors.T @ Sigma^{-1} (y - mu).

    cov_at_pairs : (N, N) covariance of the smooth part at the subject times
    cov_vectors  : (N, K) covariance of each score with the observations
    """
    sigma = cov_at_pairs + np.diag(np.full(len(times), noise_diag))
    resid = np.asarray(values, float) - np.asarray(mean_at_times, float)
    return np.asarray(cov_vectors, float).T @ np.linalg.solve(sigma, resid)


def orthonormalize_quadrature(funcs, qw):
    """Gram-Schmidt under the quadrature inner product diag(qw)."""
    funcs = [np.asarray(f, float).copy() for f in funcs]
    out = []
    for f in funcs:
        for g in out:
            f = f - g * float(np.sum(qw * f * g))
        f = f / np.sqrt(float(np.sum(qw * f * f)))
        out.append(f)
    return np.column_stack(out)
