import numpy as np
import pytest
from numpy.testing import assert_allclose

from dpca.data import trapezoid_weights, uniform_grid
from dpca.errors import DimensionMismatch, UnsupportedOrder, ZeroDenominator
from dpca.simlab import (
    SimDesign,
    SimModel,
    bump_mean_deriv,
    child_seed,
    generate,
    legendre_basis,
    population_fve,
    rmise,
    run_benchmark,
    true_derivatives,
)

GRID = uniform_grid((0.0, 1.0), 51)


def test_legendre_first_is_constant():
    vals, derivs = legendre_basis(1, GRID)
    assert_allclose(vals, 1.0)
    assert_allclose(derivs, 0.0)


def test_legendre_second_closed_forms():
    vals, derivs = legendre_basis(2, GRID)
    assert abs(vals[-1] - np.sqrt(3.0)) < 1e-12
    qw = trapezoid_weights(GRID)
    assert abs((derivs**2) @ qw - 12.0) < 1e-9


def test_legendre_gram_orthonormal():
    # trapezoid quadrature on 1001 points carries ~6e-5 error for the
    # degree-8 products, so the honest bound is 1e-4, not machine precision
    grid = uniform_grid((0.0, 1.0), 1001)
    qw = trapezoid_weights(grid)
    basis = np.column_stack([legendre_basis(k, grid)[0] for k in range(1, 6)])
    gram = basis.T @ (qw[:, None] * basis)
    assert np.max(np.abs(gram - np.eye(5))) < 1e-4


def test_legendre_rejects_bad_order():
    with pytest.raises(UnsupportedOrder):
        legendre_basis(0, GRID)


def test_generate_zero_variance_reproduces_mean():
    model = SimModel(eigenvalues=(0.0,) * 5)
    design = SimDesign(variant="B", n_subjects=3, sigma=0.0)
    data, scores = generate(model, design, seed=1)
    assert_allclose(scores, 0.0)
    for t, y in zip(data.times, data.values):
        assert_allclose(y, model.mean(t), atol=1e-12)


def test_generate_beta_sampling_mean():
    design = SimDesign(variant="A", n_subjects=200, sigma=0.5)
    data, _ = generate(SimModel(), design, seed=2)
    pooled_t, _ = data.pooled()
    assert abs(pooled_t.mean() - 0.4) < 0.02
    counts = data.counts
    assert counts.min() >= 2 and counts.max() <= 9


def test_generate_deterministic():
    design = SimDesign(variant="A", n_subjects=20, sigma=1.0)
    d1, s1 = generate(SimModel(), design, seed=9)
    d2, s2 = generate(SimModel(), design, seed=9)
    assert_allclose(s1, s2, atol=0)
    for a, b in zip(d1.values, d2.values):
        assert np.array_equal(a, b)


def test_true_derivatives_zero_scores():
    model = SimModel()
    got = true_derivatives(np.zeros((2, 5)), model, GRID)
    assert_allclose(got, np.tile(model.mean_deriv(GRID), (2, 1)))


def test_mean_derivative_at_center():
    assert abs(bump_mean_deriv(0.5) - 4.0) < 1e-12


def test_true_derivatives_match_finite_differences():
    # fourth-order central differences of the analytic trajectory
    model = SimModel()
    grid = uniform_grid((0.0, 1.0), 1001)
    rng = np.random.default_rng(3)
    scores = rng.normal(0, 1, (1, 5)) * np.sqrt(model.eigenvalues)
    basis, _ = model.basis(grid)
    curve = model.mean(grid) + (scores @ basis.T)[0]
    h = grid[1] - grid[0]
    fd = (curve[:-4] - 8 * curve[1:-3] + 8 * curve[3:-1] - curve[4:]) / (12 * h)
    got = true_derivatives(scores, model, grid)[0, 2:-2]
    assert np.max(np.abs(got - fd)) < 1e-5


def test_rmise_exact_and_hand_case():
    truth = np.full((3, 51), 2.0)
    assert rmise(truth, truth, GRID) == 0.0
    est = np.full((3, 51), 3.0)
    assert abs(rmise(est, truth, GRID) - 0.25) < 1e-12


def test_rmise_scale_invariance():
    rng = np.random.default_rng(4)
    truth = rng.normal(size=(5, 51)) + 3.0
    est = truth + rng.normal(size=(5, 51))
    a = rmise(est, truth, GRID)
    b = rmise(17.3 * est, 17.3 * truth, GRID)
    assert abs(a - b) < 1e-12


def test_rmise_zero_denominator():
    with pytest.raises(ZeroDenominator):
        rmise(np.ones((1, 51)), np.zeros((1, 51)), GRID)


def test_rmise_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        rmise(np.ones((2, 51)), np.ones((3, 51)), GRID)


def test_population_fve_reproduces_model_fractions():
    fd, ff = population_fve(SimModel())
    assert_allclose(fd, [0.56, 0.77, 0.92, 1.0, 1.0], atol=0.01)
    assert_allclose(ff, [0.0, 0.18, 0.61, 0.74, 1.0], atol=0.01)
    # derivative representation dominates pointwise
    assert np.all(fd + 1e-12 >= ff)


def test_population_fve_single_component():
    fd, ff = population_fve(SimModel(eigenvalues=(2.0, 1.5)))
    assert fd[-1] == 1.0 and abs(ff[-1] - 1.0) < 1e-6


def test_child_seed_stable():
    assert child_seed(7, 3) == child_seed(7, 3)
    assert child_seed(7, 3) != child_seed(7, 4)


@pytest.mark.slow
def test_benchmark_deterministic_across_threads():
    design = SimDesign(variant="B", n_subjects=40, sigma=1.0)
    r1 = run_benchmark(design, replicates=2, threads=1, seed=5)
    r2 = run_benchmark(design, replicates=2, threads=2, seed=5)
    assert r1.to_csv() == r2.to_csv()
    assert r1.to_json() == r2.to_json()
    r3 = run_benchmark(design, replicates=2, threads=2, seed=5)
    assert r2.to_csv() == r3.to_csv()


@pytest.mark.slow
def test_benchmark_report_contents():
    design = SimDesign(variant="B", n_subjects=40, sigma=1.0)
    rep = run_benchmark(design, replicates=2, threads=2, seed=5)
    csv_text = rep.to_csv()
    assert csv_text.startswith("method,K,mean,sd,n_rep")
    for method in ("DPCA", "FPCA", "MU1", "LOCAL", "SMOOTH_DQ"):
        assert method in csv_text
    assert rep.value("DPCA", "3") > 0
    assert rep.selected_k["DPCA"][0] >= 1
    assert len(rep.eigen_inequality) == 2
    import json

    payload = json.loads(rep.to_json())
    assert payload["replicates"] == 2
    assert payload["design"]["variant"] == "B"