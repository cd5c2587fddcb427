"""Containers for longitudinal data, grid functions/surfaces and eigensystems.

Functions and surfaces are held as values on a uniform grid over the fitting
domain, together with trapezoid quadrature weights.  All containers are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotSymmetric, TimeOutOfDomain

__all__ = [
    "GridFunction",
    "GridSurface",
    "EigenSystem",
    "LongitudinalDataset",
    "uniform_grid",
    "trapezoid_weights",
]


def uniform_grid(domain: tuple[float, float], num: int = 51) -> np.ndarray:
    """Uniform evaluation grid with inclusive endpoints."""
    lo, hi = float(domain[0]), float(domain[1])
    if not hi > lo:
        raise ValueError("domain must have positive width")
    if num < 2:
        raise ValueError("grid needs at least 2 points")
    return np.linspace(lo, hi, num)


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    """Trapezoid quadrature weights; they sum to the domain width."""
    grid = np.asarray(grid, dtype=float)
    step = grid[1] - grid[0]
    w = np.full(grid.shape, step)
    w[0] = w[-1] = 0.5 * step
    return w


def _check_uniform(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1D array with at least 2 points")
    steps = np.diff(grid)
    if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=1e-8, atol=0):
        raise ValueError("grid must be uniform and increasing")
    return grid


@dataclass(frozen=True)
class GridFunction:
    """Function values on a uniform grid, with trapezoid quadrature."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = _check_uniform(self.grid)
        values = np.asarray(self.values, dtype=float)
        if values.shape != grid.shape:
            raise DimensionMismatch("values must match the grid length")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def quad_weights(self) -> np.ndarray:
        return trapezoid_weights(self.grid)

    def __call__(self, t) -> np.ndarray:
        """Linear interpolation at times ``t`` (clamped to the grid range)."""
        return np.interp(np.asarray(t, dtype=float), self.grid, self.values)

    def integrate(self) -> float:
        return float(self.quad_weights @ self.values)

    def inner(self, other: "GridFunction") -> float:
        """Quadrature inner product with another function on the same grid."""
        return float(self.quad_weights @ (self.values * other.values))


@dataclass(frozen=True)
class GridSurface:
    """Values of a bivariate function on grid x grid.

    ``values[a, b]`` is the surface at ``(s, t) = (grid[a], grid[b])``.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = _check_uniform(self.grid)
        values = np.asarray(self.values, dtype=float)
        m = grid.size
        if values.shape != (m, m):
            raise DimensionMismatch("surface values must be grid x grid")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def symmetrized(self) -> "GridSurface":
        return GridSurface(self.grid, 0.5 * (self.values + self.values.T))

    def max_asymmetry(self) -> float:
        return float(np.max(np.abs(self.values - self.values.T)))

    def require_symmetric(self, tol: float = 1e-8) -> None:
        gap = self.max_asymmetry()
        if gap >= tol:
            raise NotSymmetric(f"surface asymmetry {gap:.3e} exceeds {tol:.1e}")

    def value_at(self, s, t) -> np.ndarray:
        """Bilinear interpolation at point arrays ``s`` and ``t``."""
        g = self.grid
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        step = g[1] - g[0]
        ia = np.clip(((s - g[0]) / step).astype(int), 0, g.size - 2)
        ib = np.clip(((t - g[0]) / step).astype(int), 0, g.size - 2)
        fa = np.clip((s - g[ia]) / step, 0.0, 1.0)
        fb = np.clip((t - g[ib]) / step, 0.0, 1.0)
        v = self.values
        return (
            v[ia, ib] * (1 - fa) * (1 - fb)
            + v[ia + 1, ib] * fa * (1 - fb)
            + v[ia, ib + 1] * (1 - fa) * fb
            + v[ia + 1, ib + 1] * fa * fb
        )

    def columns_at(self, t) -> np.ndarray:
        """Linear interpolation of grid columns at times ``t``.

        Returns an array of shape ``(len(grid), len(t))`` whose ``j``-th
        column is the function ``s -> surface(s, t_j)``.
        """
        g = self.grid
        t = np.atleast_1d(np.asarray(t, dtype=float))
        step = g[1] - g[0]
        ib = np.clip(((t - g[0]) / step).astype(int), 0, g.size - 2)
        fb = np.clip((t - g[ib]) / step, 0.0, 1.0)
        return self.values[:, ib] * (1 - fb) + self.values[:, ib + 1] * fb

    def diagonal(self) -> np.ndarray:
        return np.diagonal(self.values).copy()


@dataclass(frozen=True)
class EigenSystem:
    """Descending eigenvalues with quadrature-orthonormal eigenfunctions.

    ``eigenfunctions[:, k]`` holds the k-th eigenfunction on ``grid``.
    """

    grid: np.ndarray
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray

    def __post_init__(self):
        grid = _check_uniform(self.grid)
        lam = np.asarray(self.eigenvalues, dtype=float)
        phi = np.asarray(self.eigenfunctions, dtype=float)
        if phi.shape != (grid.size, lam.size):
            raise DimensionMismatch("eigenfunctions must be (grid, n_components)")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenfunctions", phi)

    def __len__(self) -> int:
        return self.eigenvalues.size

    def function(self, k: int) -> GridFunction:
        """The k-th eigenfunction (0-based) as a :class:`GridFunction`."""
        return GridFunction(self.grid, self.eigenfunctions[:, k])

    def total_variance(self) -> float:
        return float(np.sum(self.eigenvalues))


class LongitudinalDataset:
    """Ragged collection of per-subject (time, value) observations.

    Parameters
    ----------
    times, values : sequences of 1D arrays
        Per-subject observation times (strictly increasing) and measurements.
    subject_ids : sequence, optional
        Stable identifiers; defaults to ``"0", "1", ...``.
    domain : (float, float), optional
        Compact observation interval; defaults to the observed time range.
    """

    def __init__(self, times, values, subject_ids=None, domain=None):
        if len(times) != len(values):
            raise DimensionMismatch("times and values must have one entry per subject")
        if len(times) == 0:
            raise ValueError("dataset needs at least one subject")
        self.times: list[np.ndarray] = []
        self.values: list[np.ndarray] = []
        for i, (t, y) in enumerate(zip(times, values)):
            t = np.asarray(t, dtype=float)
            y = np.asarray(y, dtype=float)
            if t.ndim != 1 or t.shape != y.shape:
                raise DimensionMismatch(f"subject {i}: times and values must be equal-length 1D arrays")
            if t.size < 1:
                raise ValueError(f"subject {i} has no observations")
            if t.size > 1 and np.any(np.diff(t) <= 0):
                raise ValueError(f"subject {i}: times must be strictly increasing")
            if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
                raise ValueError(f"subject {i}: non-finite observation")
            self.times.append(t)
            self.values.append(y)
        if subject_ids is None:
            subject_ids = [str(i) for i in range(len(times))]
        if len(subject_ids) != len(times):
            raise DimensionMismatch("one subject id per subject required")
        self.subject_ids = [str(s) for s in subject_ids]
        t_lo = min(float(t[0]) for t in self.times)
        t_hi = max(float(t[-1]) for t in self.times)
        if domain is None:
            domain = (t_lo, t_hi)
        else:
            domain = (float(domain[0]), float(domain[1]))
            if t_lo < domain[0] or t_hi > domain[1]:
                raise TimeOutOfDomain("observations fall outside the stated domain")
        if not domain[1] > domain[0]:
            raise ValueError("domain must have positive width")
        self.domain = domain

    @property
    def n_subjects(self) -> int:
        return len(self.times)

    @property
    def common_grid(self) -> bool:
        """True when every subject is observed on one shared time vector."""
        first = self.times[0]
        return all(t.size == first.size and np.array_equal(t, first) for t in self.times)

    @property
    def counts(self) -> np.ndarray:
        return np.array([t.size for t in self.times])

    @property
    def n_observations(self) -> int:
        return int(self.counts.sum())

    def pooled(self) -> tuple[np.ndarray, np.ndarray]:
        """All observations flattened to (times, values)."""
        return np.concatenate(self.times), np.concatenate(self.values)

    def __repr__(self) -> str:
        return (
            f"LongitudinalDataset(n_subjects={self.n_subjects}, "
            f"n_observations={self.n_observations}, domain={self.domain})"
        )
