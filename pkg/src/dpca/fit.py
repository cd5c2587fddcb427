"""Derivative covariance estimation, derivative scores and the fitted model.

The derivative process is represented in its own eigenbasis: the mixed
partial derivative of the covariance surface is estimated (by default in two
staged one-dimensional smoothing passes over the fitted surface, which is
more stable near the boundary than smoothing raw products directly), its
spectral decomposition yields derivative eigenfunctions and eigenvalues, and
per-subject derivative scores are best linear unbiased predictions computed
from the subject's noisy observations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .data import EigenSystem, GridFunction, GridSurface, LongitudinalDataset, trapezoid_weights, uniform_grid
from .errors import (
    DimensionMismatch,
    DpcaError,
    EmptySpectrum,
    TimeOutOfDomain,
)
from .fpca import (
    eigenfunction_derivative,
    eigensystem,
    estimate_cov_surface,
    estimate_mean_and_derivative,
    estimate_noise_variance,
    observation_covariance,
    raw_covariances,
    reconstruct_derivatives,
    trajectory_scores,
    _solve_observation_system,
    pooled_scatter,
)
from .smoothing import (
    Kernel,
    LocalFitSpec,
    ScatterData2D,
    bandwidth_candidates,
    bandwidth_candidates_2d,
    gcv_bandwidth_1d,
    gcv_bandwidth_2d,
    local_poly_2d,
    local_poly_weights_1d,
)

__all__ = [
    "DpcaConfig",
    "DpcaFit",
    "smooth_cross_cov",
    "smooth_deriv_cov",
    "derivative_eigensystem",
    "score_obs_cov",
    "derivative_scores",
    "fve_curves",
    "select_num_components",
    "fit_dpca",
]


@dataclass(frozen=True)
class DpcaConfig:
    """Grid, kernel, bandwidth and truncation settings for a fit.

    Bandwidths may be numbers or "auto", in which case they are selected by
    generalized cross-validation over a density-adapted candidate grid.
    """

    grid_size: int = 51
    domain: tuple[float, float] | None = None
    kernel: Kernel = Kernel.GAUSSIAN
    bandwidth_mean: float | str = "auto"
    bandwidth_cov: float | str = "auto"
    bandwidth_diag: float | None = None  # defaults to the covariance bandwidth
    fve_threshold: float = 0.9
    max_components: int = 10
    staged: bool = True

    def __post_init__(self):
        if self.grid_size < 11:
            raise ValueError("grid_size must be at least 11")
        if not 0 < self.fve_threshold <= 1:
            raise ValueError("fve_threshold must be in (0, 1]")
        for name in ("bandwidth_mean", "bandwidth_cov"):
            bw = getattr(self, name)
            if isinstance(bw, str):
                if bw != "auto":
                    raise ValueError(f"{name} must be a positive number or 'auto'")
            elif not bw > 0:
                raise ValueError(f"{name} must be a positive number or 'auto'")
        if self.max_components < 1:
            raise ValueError("max_components must be positive")


def smooth_cross_cov(
    cov: GridSurface,
    bandwidth: float,
    kernel: Kernel = Kernel.GAUSSIAN,
    raw: ScatterData2D | None = None,
    staged: bool = True,
) -> GridSurface:
    """Partial derivative of the covariance surface in its first argument.

    Staged mode (default) differentiates the fitted surface: each grid column
    is smoothed along s with a derivative-capable local quadratic fit.
    Direct mode fits the raw covariances with a degree-2 local polynomial
    targeting the (1, 0) coefficient.
    """
    grid = cov.grid
    if staged:
        spec = LocalFitSpec(2, 1, bandwidth, kernel)
        rows = local_poly_weights_1d(grid, None, spec, grid)
        return GridSurface(grid, rows @ cov.values)
    if raw is None:
        raise ValueError("direct mode needs the raw covariance scatter")
    vals = local_poly_2d(raw, 2, (1, 0), bandwidth, kernel, grid)
    return GridSurface(grid, vals)


def smooth_deriv_cov(
    cross_cov: GridSurface,
    bandwidth: float,
    kernel: Kernel = Kernel.GAUSSIAN,
    raw: ScatterData2D | None = None,
    staged: bool = True,
) -> GridSurface:
    """Covariance surface of the derivative process, symmetrized.

    Staged mode smooths each row of the cross-covariance along t with a
    derivative-capable local quadratic fit; direct mode fits the raw
    covariances with a cubic local polynomial targeting the (1, 1)
    coefficient.
    """
    grid = cross_cov.grid
    if staged:
        spec = LocalFitSpec(2, 1, bandwidth, kernel)
        rows = local_poly_weights_1d(grid, None, spec, grid)
        vals = cross_cov.values @ rows.T
    else:
        if raw is None:
            raise ValueError("direct mode needs the raw covariance scatter")
        vals = local_poly_2d(raw, 3, (1, 1), bandwidth, kernel, grid)
    return GridSurface(grid, vals).symmetrized()


def derivative_eigensystem(deriv_cov: GridSurface) -> EigenSystem:
    """Spectral decomposition of the derivative covariance surface."""
    return eigensystem(deriv_cov)


def score_obs_cov(cross_cov: GridSurface, eigenfunction: np.ndarray, times) -> np.ndarray:
    """Covariances between one derivative score and a subject's observations.

    Entry j is the quadrature integral of dG/ds(s, T_j) against the
    derivative eigenfunction, with the surface column at T_j obtained by
    linear interpolation between grid columns.
    """
    grid = cross_cov.grid
    times = np.asarray(times, dtype=float)
    if np.any(times < grid[0] - 1e-12) or np.any(times > grid[-1] + 1e-12):
        raise TimeOutOfDomain("subject times outside the fitted domain")
    qw = trapezoid_weights(grid)
    cols = cross_cov.columns_at(times)  # (grid, n_times)
    return cols.T @ (qw * np.asarray(eigenfunction, dtype=float))


def derivative_scores(
    data,
    mean: GridFunction,
    cov: GridSurface,
    cross_cov: GridSurface,
    sigma2: float,
    deriv_eig: EigenSystem,
    n_components: int,
) -> np.ndarray:
    """BLUP derivative component scores, one row per subject.

    Score k is zeta_k^T Sigma_i^{-1} (Y_i - mu(T_i)) with the same ridged
    observation covariance as the trajectory scores.
    """
    if n_components > len(deriv_eig):
        raise DimensionMismatch(
            f"requested {n_components} components but only {len(deriv_eig)} retained"
        )
    if n_components == 0:
        return np.empty((data.n_subjects, 0))
    scores = np.empty((data.n_subjects, n_components))
    for i, (t, y) in enumerate(zip(data.times, data.values)):
        sigma_y = observation_covariance(cov, sigma2, t)
        x = _solve_observation_system(sigma_y, y - mean(t), data.subject_ids[i])
        zeta = np.column_stack(
            [
                score_obs_cov(cross_cov, deriv_eig.eigenfunctions[:, k], t)
                for k in range(n_components)
            ]
        )
        scores[i] = zeta.T @ x
    return scores


def fve_curves(
    deriv_eig: EigenSystem,
    traj_eig: EigenSystem,
    traj_eigfun_derivs: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative fractions of derivative variance explained.

    The first curve uses the derivative eigenvalues over their total.  The
    second pairs trajectory eigenvalues with squared quadrature norms of the
    eigenfunction derivatives, normalized by the sum of all such terms; at
    the population level the two totals coincide (the derivative-variance
    trace identity), so both curves reproduce the population fractions.
    """
    if len(deriv_eig) == 0 or len(traj_eig) == 0:
        raise EmptySpectrum("both eigensystems must be nonempty")
    fve_dpca = np.minimum(
        np.cumsum(deriv_eig.eigenvalues) / deriv_eig.total_variance(), 1.0
    )
    derivs = np.asarray(traj_eigfun_derivs, dtype=float)
    qw = trapezoid_weights(traj_eig.grid)
    norms = (derivs**2).T @ qw
    k = min(len(traj_eig), derivs.shape[1])
    terms = traj_eig.eigenvalues[:k] * norms[:k]
    total = float(terms.sum())
    if total <= 0:
        raise EmptySpectrum("trajectory eigenfunction derivatives carry no variance")
    fve_fpca = np.cumsum(terms) / total
    return fve_dpca, fve_fpca


def select_num_components(fve, threshold: float = 0.9) -> int:
    """Smallest K whose FVE reaches the threshold, or the full length."""
    fve = np.asarray(fve, dtype=float)
    if fve.size == 0:
        raise EmptySpectrum("empty FVE curve")
    hits = np.flatnonzero(fve >= threshold)
    return int(hits[0]) + 1 if hits.size else int(fve.size)


@dataclass(frozen=True)
class DpcaFit:
    """Complete fitted model.

    Holds the mean and its derivative, the covariance surface, its partial
    derivative and the derivative covariance, the measurement-error
    variance, both eigensystems, eigenfunction derivatives, both score
    matrices and the configuration actually used.
    """

    subject_ids: list[str]
    mean: GridFunction
    mean_deriv: GridFunction
    cov: GridSurface
    cross_cov: GridSurface
    deriv_cov: GridSurface
    sigma2: float
    traj_eig: EigenSystem
    deriv_eig: EigenSystem
    traj_eigfun_derivs: np.ndarray
    traj_scores: np.ndarray
    deriv_scores: np.ndarray
    fve_dpca: np.ndarray
    fve_fpca: np.ndarray
    selected_k_dpca: int
    selected_k_fpca: int
    bandwidth_mean: float
    bandwidth_cov: float
    config: DpcaConfig

    @property
    def grid(self) -> np.ndarray:
        return self.mean.grid

    def reconstruct(self, n_components: int | None = None, representation: str = "dpca") -> np.ndarray:
        """Per-subject derivative trajectories on the grid.

        representation "dpca" combines derivative scores with derivative
        eigenfunctions; "fpca" combines trajectory scores with derivatives
        of the trajectory eigenfunctions.
        """
        if representation == "dpca":
            k = self.selected_k_dpca if n_components is None else n_components
            return reconstruct_derivatives(
                self.mean_deriv, self.deriv_scores, self.deriv_eig.eigenfunctions, k
            )
        if representation == "fpca":
            k = self.selected_k_fpca if n_components is None else n_components
            return reconstruct_derivatives(
                self.mean_deriv, self.traj_scores, self.traj_eigfun_derivs, k
            )
        raise ValueError("representation must be 'dpca' or 'fpca'")

    def to_dict(self) -> dict:
        """JSON-ready representation (surfaces row-major, grids explicit)."""
        return {
            "schema": "dpca-fit-v1",
            "grid": self.grid.tolist(),
            "subject_ids": list(self.subject_ids),
            "mean": self.mean.values.tolist(),
            "mean_deriv": self.mean_deriv.values.tolist(),
            "cov": self.cov.values.tolist(),
            "cross_cov": self.cross_cov.values.tolist(),
            "deriv_cov": self.deriv_cov.values.tolist(),
            "sigma2": self.sigma2,
            "traj_eigenvalues": self.traj_eig.eigenvalues.tolist(),
            "traj_eigenfunctions": self.traj_eig.eigenfunctions.tolist(),
            "deriv_eigenvalues": self.deriv_eig.eigenvalues.tolist(),
            "deriv_eigenfunctions": self.deriv_eig.eigenfunctions.tolist(),
            "traj_eigfun_derivs": self.traj_eigfun_derivs.tolist(),
            "traj_scores": self.traj_scores.tolist(),
            "deriv_scores": self.deriv_scores.tolist(),
            "fve_dpca": self.fve_dpca.tolist(),
            "fve_fpca": self.fve_fpca.tolist(),
            "selected_k_dpca": self.selected_k_dpca,
            "selected_k_fpca": self.selected_k_fpca,
            "bandwidth_mean": self.bandwidth_mean,
            "bandwidth_cov": self.bandwidth_cov,
            "config": {
                "grid_size": self.config.grid_size,
                "domain": list(self.config.domain) if self.config.domain else None,
                "kernel": self.config.kernel.value,
                "fve_threshold": self.config.fve_threshold,
                "max_components": self.config.max_components,
                "staged": self.config.staged,
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DpcaFit":
        grid = np.asarray(payload["grid"], dtype=float)
        cfg = payload.get("config", {})
        config = DpcaConfig(
            grid_size=cfg.get("grid_size", grid.size),
            domain=tuple(cfg["domain"]) if cfg.get("domain") else None,
            kernel=Kernel(cfg.get("kernel", "gaussian")),
            bandwidth_mean=payload["bandwidth_mean"],
            bandwidth_cov=payload["bandwidth_cov"],
            fve_threshold=cfg.get("fve_threshold", 0.9),
            max_components=cfg.get("max_components", 10),
            staged=cfg.get("staged", True),
        )
        return cls(
            subject_ids=list(payload["subject_ids"]),
            mean=GridFunction(grid, payload["mean"]),
            mean_deriv=GridFunction(grid, payload["mean_deriv"]),
            cov=GridSurface(grid, payload["cov"]),
            cross_cov=GridSurface(grid, payload["cross_cov"]),
            deriv_cov=GridSurface(grid, payload["deriv_cov"]),
            sigma2=float(payload["sigma2"]),
            traj_eig=EigenSystem(
                grid,
                np.asarray(payload["traj_eigenvalues"], dtype=float),
                np.asarray(payload["traj_eigenfunctions"], dtype=float),
            ),
            deriv_eig=EigenSystem(
                grid,
                np.asarray(payload["deriv_eigenvalues"], dtype=float),
                np.asarray(payload["deriv_eigenfunctions"], dtype=float),
            ),
            traj_eigfun_derivs=np.asarray(payload["traj_eigfun_derivs"], dtype=float),
            traj_scores=np.asarray(payload["traj_scores"], dtype=float),
            deriv_scores=np.asarray(payload["deriv_scores"], dtype=float),
            fve_dpca=np.asarray(payload["fve_dpca"], dtype=float),
            fve_fpca=np.asarray(payload["fve_fpca"], dtype=float),
            selected_k_dpca=int(payload["selected_k_dpca"]),
            selected_k_fpca=int(payload["selected_k_fpca"]),
            bandwidth_mean=float(payload["bandwidth_mean"]),
            bandwidth_cov=float(payload["bandwidth_cov"]),
            config=config,
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "DpcaFit":
        return cls.from_dict(json.loads(text))


class _Stage:
    """Attach the failing pipeline stage to raised package errors."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, DpcaError) and exc.stage is None:
            exc.stage = self.name
            exc.args = (f"[stage: {self.name}] " + (str(exc.args[0]) if exc.args else ""),)
        return False


def fit_dpca(data: LongitudinalDataset, config: DpcaConfig | None = None, **overrides) -> DpcaFit:
    """Run the full estimation pipeline and return a fitted model.

    Stages: pooled mean and derivative, raw covariances, covariance surface,
    measurement-error variance, trajectory eigensystem, cross-covariance,
    derivative covariance, derivative eigensystem, then both families of
    BLUP scores.  Errors carry the stage name that failed.
    """
    if config is None:
        config = DpcaConfig()
    if overrides:
        config = replace(config, **overrides)
    domain = config.domain or data.domain
    grid = uniform_grid(domain, config.grid_size)
    kernel = config.kernel

    # Gaussian-kernel GCV minimizers are inflated by 1.1, and for sparse
    # irregular designs the covariance bandwidth is stabilized by a geometric
    # mean with the largest candidate: raw GCV systematically undersmooths
    # correlated within-subject residual products.
    gauss_factor = 1.1 if kernel is Kernel.GAUSSIAN else 1.0
    dense_design = data.common_grid and int(np.min(data.counts)) >= 20

    with _Stage("mean"):
        scatter = pooled_scatter(data)
        if isinstance(config.bandwidth_mean, str):
            cands = bandwidth_candidates(scatter.x, 2)
            if not dense_design:
                # sparse pooled residuals are correlated within subject,
                # which can collapse GCV onto near-interpolation bandwidths
                # whose one-sided boundary derivative estimates are
                # unbounded; keep candidates above 5% of the domain span
                floor = min((domain[1] - domain[0]) / 20.0, float(np.max(cands)))
                if float(np.min(cands)) < floor:
                    cands = np.geomspace(floor, float(np.max(cands)), cands.size)
            h_mu = gauss_factor * gcv_bandwidth_1d(
                scatter, LocalFitSpec(2, 0, kernel=kernel), cands
            )
        else:
            h_mu = float(config.bandwidth_mean)
        mean, mean_deriv = estimate_mean_and_derivative(data, h_mu, kernel, grid)

    with _Stage("raw_covariances"):
        raw = raw_covariances(data, mean)

    with _Stage("covariance"):
        if isinstance(config.bandwidth_cov, str):
            cands = bandwidth_candidates_2d(raw.s, raw.t, 1)
            h_cov = gauss_factor * gcv_bandwidth_2d(raw, 1, kernel, cands)
            if not dense_design:
                h_cov = float(np.sqrt(h_cov * np.max(cands)))
        else:
            h_cov = float(config.bandwidth_cov)
        cov = estimate_cov_surface(raw, h_cov, kernel, grid)

    with _Stage("noise_variance"):
        h_diag = config.bandwidth_diag if config.bandwidth_diag is not None else h_cov
        sigma2 = estimate_noise_variance(data, mean, cov, h_diag, kernel)

    # absolute eigenvalue floor: numerically-zero surfaces (constant data)
    # must yield empty spectra, which a relative cut alone cannot deliver
    eig_floor = 1e-12 * max(1.0, float(np.mean(scatter.y**2)))

    with _Stage("trajectory_eigensystem"):
        traj_eig = eigensystem(cov, min_eigenvalue=eig_floor)
        # spectrally clamped surface for observation covariances: the raw
        # smooth need not be positive semidefinite, and negative directions
        # at a subject's time pairs can cancel the noise diagonal and make
        # the BLUP system arbitrarily ill-posed
        lam_all = traj_eig.eigenvalues
        phi_all = traj_eig.eigenfunctions
        cov_psd = GridSurface(grid, (phi_all * lam_all) @ phi_all.T).symmetrized()

    with _Stage("cross_covariance"):
        # staged differentiation acts on the clamped surface: the derivative
        # covariance then factors as (L phi_k) Gram sums over the retained
        # components, which makes the derivative spectrum dominate the
        # plug-in variance at every truncation level exactly, not just
        # approximately; negative roundoff components of the raw smooth
        # would otherwise inject spurious differentiated mass
        cross_base = cov_psd if config.staged else cov
        cross_cov = smooth_cross_cov(cross_base, h_cov, kernel, raw=raw, staged=config.staged)

    with _Stage("derivative_covariance"):
        deriv_cov = smooth_deriv_cov(cross_cov, h_cov, kernel, raw=raw, staged=config.staged)

    with _Stage("derivative_eigensystem"):
        deriv_eig = eigensystem(deriv_cov, min_eigenvalue=eig_floor)

    k_traj = min(config.max_components, len(traj_eig))
    k_deriv = min(config.max_components, len(deriv_eig))

    with _Stage("eigenfunction_derivatives"):
        # all retained components: the trajectory FVE totals need them
        if len(traj_eig):
            traj_eigfun_derivs = np.column_stack(
                [
                    eigenfunction_derivative(cross_cov, traj_eig, k).values
                    for k in range(len(traj_eig))
                ]
            )
        else:
            traj_eigfun_derivs = np.empty((grid.size, 0))

    with _Stage("fve"):
        if k_traj and k_deriv:
            fve_dpca, fve_fpca = fve_curves(deriv_eig, traj_eig, traj_eigfun_derivs)
            sel_d = select_num_components(fve_dpca[:k_deriv], config.fve_threshold)
            sel_f = min(select_num_components(fve_fpca, config.fve_threshold), k_traj)
            fve_dpca = fve_dpca[:k_deriv]
            fve_fpca = fve_fpca[:k_traj]
        else:
            fve_dpca = np.empty(0)
            fve_fpca = np.empty(0)
            sel_d = sel_f = 0

    with _Stage("trajectory_scores"):
        traj_scores = trajectory_scores(data, mean, cov_psd, sigma2, traj_eig, k_traj)

    with _Stage("derivative_scores"):
        deriv_scores = derivative_scores(
            data, mean, cov_psd, cross_cov, sigma2, deriv_eig, k_deriv
        )

    return DpcaFit(
        subject_ids=list(data.subject_ids),
        mean=mean,
        mean_deriv=mean_deriv,
        cov=cov,
        cross_cov=cross_cov,
        deriv_cov=deriv_cov,
        sigma2=sigma2,
        traj_eig=traj_eig,
        deriv_eig=deriv_eig,
        traj_eigfun_derivs=traj_eigfun_derivs,
        traj_scores=traj_scores,
        deriv_scores=deriv_scores,
        fve_dpca=fve_dpca,
        fve_fpca=fve_fpca,
        selected_k_dpca=sel_d,
        selected_k_fpca=sel_f,
        bandwidth_mean=h_mu,
        bandwidth_cov=h_cov,
        config=config,
    )
