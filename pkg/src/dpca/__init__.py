"""Derivative principal component analysis for longitudinal and functional data.

The package estimates mean derivatives, covariance-derivative surfaces,
derivative eigenfunctions and BLUP derivative principal component scores from
sparse or dense longitudinal observations, reconstructs individual derivative
trajectories, and ships simulation benchmarks, per-curve baselines and a
score-based classification pipeline.
"""

from .data import EigenSystem, GridFunction, GridSurface, LongitudinalDataset, uniform_grid
from .fit import (
    DpcaConfig,
    DpcaFit,
    derivative_scores,
    fit_dpca,
    fve_curves,
    select_num_components,
    smooth_cross_cov,
    smooth_deriv_cov,
)
from .fpca import (
    eigenfunction_derivative,
    eigensystem,
    estimate_cov_surface,
    estimate_mean_and_derivative,
    estimate_noise_variance,
    raw_covariances,
    reconstruct_derivatives,
    trajectory_scores,
)
from .smoothing import (
    Kernel,
    LocalFitSpec,
    ScatterData1D,
    ScatterData2D,
    gcv_bandwidth_1d,
    gcv_bandwidth_2d,
    local_poly_1d,
    local_poly_2d,
)

__version__ = "0.1.0"

__all__ = [
    "DpcaConfig",
    "DpcaFit",
    "EigenSystem",
    "GridFunction",
    "GridSurface",
    "Kernel",
    "LocalFitSpec",
    "LongitudinalDataset",
    "ScatterData1D",
    "ScatterData2D",
    "derivative_scores",
    "eigenfunction_derivative",
    "eigensystem",
    "estimate_cov_surface",
    "estimate_mean_and_derivative",
    "estimate_noise_variance",
    "fit_dpca",
    "fve_curves",
    "gcv_bandwidth_1d",
    "gcv_bandwidth_2d",
    "local_poly_1d",
    "local_poly_2d",
    "raw_covariances",
    "reconstruct_derivatives",
    "select_num_components",
    "smooth_cross_cov",
    "smooth_deriv_cov",
    "trajectory_scores",
    "uniform_grid",
    "__version__",
]
