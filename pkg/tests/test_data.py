import numpy as np
import pytest
from numpy.testing import assert_allclose

from dpca.data import (
    EigenSystem,
    GridFunction,
    GridSurface,
    LongitudinalDataset,
    trapezoid_weights,
    uniform_grid,
)
from dpca.errors import DimensionMismatch, TimeOutOfDomain


def test_uniform_grid_and_weights():
    grid = uniform_grid((0.0, 2.0), 21)
    assert grid[0] == 0.0 and grid[-1] == 2.0
    qw = trapezoid_weights(grid)
    assert abs(qw.sum() - 2.0) < 1e-12
    assert abs(qw[0] - 0.05) < 1e-12 and abs(qw[5] - 0.1) < 1e-12


def test_grid_function_interp_and_integrate():
    grid = uniform_grid((0.0, 1.0), 11)
    f = GridFunction(grid, grid**2)
    assert abs(f(0.55) - (0.25 + 0.36) / 2) < 1e-12
    assert abs(f.integrate() - 1.0 / 3.0) < 2e-3
    g = GridFunction(grid, np.ones(11))
    assert abs(f.inner(g) - f.integrate()) < 1e-14


def test_grid_function_rejects_nonuniform():
    with pytest.raises(ValueError):
        GridFunction(np.array([0.0, 0.2, 0.5]), np.zeros(3))
    with pytest.raises(DimensionMismatch):
        GridFunction(uniform_grid((0, 1), 5), np.zeros(4))


def test_surface_bilinear_interp():
    grid = uniform_grid((0.0, 1.0), 21)
    surf = GridSurface(grid, np.add.outer(grid, 2 * grid))
    s = np.array([0.13, 0.77])
    t = np.array([0.31, 0.05])
    assert_allclose(surf.value_at(s, t), s + 2 * t, atol=1e-12)


def test_surface_columns_at():
    grid = uniform_grid((0.0, 1.0), 11)
    surf = GridSurface(grid, np.outer(grid, grid))
    cols = surf.columns_at([0.25, 0.9])
    assert cols.shape == (11, 2)
    assert_allclose(cols[:, 0], grid * 0.25, atol=1e-12)


def test_surface_symmetry_helpers():
    grid = uniform_grid((0.0, 1.0), 5)
    vals = np.arange(25.0).reshape(5, 5)
    surf = GridSurface(grid, vals)
    assert surf.max_asymmetry() > 0
    sym = surf.symmetrized()
    assert sym.max_asymmetry() == 0.0
    from dpca.errors import NotSymmetric

    with pytest.raises(NotSymmetric):
        surf.require_symmetric()


def test_eigen_system_validation():
    grid = uniform_grid((0.0, 1.0), 7)
    with pytest.raises(DimensionMismatch):
        EigenSystem(grid, np.array([1.0]), np.zeros((7, 2)))
    eig = EigenSystem(grid, np.array([2.0, 1.0]), np.zeros((7, 2)))
    assert len(eig) == 2
    assert eig.total_variance() == 3.0
    assert eig.function(0).grid is eig.grid


def test_dataset_validation():
    with pytest.raises(ValueError):
        LongitudinalDataset([[0.5, 0.5]], [[1.0, 2.0]])
    with pytest.raises(DimensionMismatch):
        LongitudinalDataset([[0.5]], [[1.0, 2.0]])
    with pytest.raises(TimeOutOfDomain):
        LongitudinalDataset([[0.5, 2.0]], [[1.0, 2.0]], domain=(0, 1))


def test_dataset_properties():
    data = LongitudinalDataset(
        [[0.1, 0.4], [0.2]], [[1.0, 2.0], [0.5]], subject_ids=["a", "b"]
    )
    assert data.n_subjects == 2
    assert data.n_observations == 3
    assert list(data.counts) == [2, 1]
    assert not data.common_grid
    t, y = data.pooled()
    assert t.size == 3 and y.size == 3
    same = LongitudinalDataset([[0.1, 0.4]] * 3, [[1.0, 2.0]] * 3)
    assert same.common_grid