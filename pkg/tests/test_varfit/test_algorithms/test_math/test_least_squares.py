import numpy as np
import pytest
from varfit.algorithms.math.least_squares import (
    CompoundSymmetryMetric,
    DiagonalMetric,
    fit_line,
)
from varfit.exceptions import PreconditionError


def test_exact_line_recovered():
    """Noise-free data give the line back under any metric."""
    d = np.array([1e-4, 4e-4, 9e-4, 16e-4, 25e-4])
    s = 2.0 + 300.0 * d
    for metric in (
        DiagonalMetric(np.ones(5)),
        DiagonalMetric(np.array([5.0, 4.0, 3.0, 2.0, 1.0])),
        CompoundSymmetryMetric(scale=0.3, rho=0.6, size=5),
    ):
        beta0, beta1 = fit_line(d, s, metric)
        assert pytest.approx(float(beta0), rel=1e-10) == 2.0
        assert pytest.approx(float(beta1), rel=1e-8) == 300.0


def test_matches_normal_equations():
    """Weighted fit equals the textbook (X^T W X)^-1 X^T W s."""
    rng = np.random.default_rng(1)
    d = np.arange(1, 9, dtype=float) ** 2
    s = rng.standard_normal(8)
    w = rng.uniform(0.5, 2.0, 8)
    X = np.column_stack([np.ones(8), d])
    expected = np.linalg.solve(X.T @ (w[:, None] * X), X.T @ (w * s))
    beta0, beta1 = fit_line(d, s, DiagonalMetric(w))
    assert pytest.approx(float(beta0)) == expected[0]
    assert pytest.approx(float(beta1)) == expected[1]


def test_compound_symmetry_equals_ols():
    """With an intercept, a compound-symmetry GLS fit reproduces OLS."""
    rng = np.random.default_rng(2)
    d = np.arange(1, 11, dtype=float) ** 2 / 100.0
    s = rng.standard_normal((4, 10))
    ols = fit_line(d, s, DiagonalMetric(np.ones(10)))
    gls = fit_line(d, s, CompoundSymmetryMetric(scale=2.0, rho=0.5, size=10))
    np.testing.assert_allclose(gls[0], ols[0], rtol=1e-10)
    np.testing.assert_allclose(gls[1], ols[1], rtol=1e-10)


def test_compound_symmetry_inner_product():
    """The Sherman-Morrison form equals u^T Sigma^-1 v."""
    m, scale, rho = 6, 1.5, 0.4
    sigma = scale * ((1 - rho) * np.eye(m) + rho * np.ones((m, m)))
    rng = np.random.default_rng(3)
    u, v = rng.standard_normal(m), rng.standard_normal(m)
    metric = CompoundSymmetryMetric(scale=scale, rho=rho, size=m)
    assert pytest.approx(float(metric.inner(u, v))) == u @ np.linalg.solve(sigma, v)


def test_batch_shapes():
    """A batch of responses is fitted along the last axis."""
    d = np.array([1.0, 2.0, 3.0])
    s = np.zeros((2, 5, 3))
    beta0, beta1 = fit_line(d, s, DiagonalMetric(np.ones(3)))
    assert beta0.shape == (2, 5)
    assert beta1.shape == (2, 5)


def test_identical_covariates():
    with pytest.raises(PreconditionError, match="identical"):
        fit_line(np.array([0.5, 0.5, 0.5]), np.array([1.0, 2.0, 3.0]), DiagonalMetric(np.ones(3)))


def test_covariates_equal_up_to_rounding():
    """Distances that differ only in the last bits are treated as identical."""
    d = 0.04 * (1.0 + np.array([0.0, 1.0, -1.0, 2.0]) * np.finfo(float).eps)
    with pytest.raises(PreconditionError, match="identical"):
        fit_line(d, np.array([1.0, 2.0, 3.0, 4.0]), DiagonalMetric(np.ones(4)))
    with pytest.raises(PreconditionError):
        fit_line(np.zeros(3), np.array([1.0, 2.0, 3.0]), DiagonalMetric(np.ones(3)))


def test_invalid_inputs():
    """Too few observations, length mismatch and bad metrics are rejected."""
    with pytest.raises(ValueError):
        fit_line(np.array([1.0]), np.array([1.0]), DiagonalMetric(np.ones(1)))
    with pytest.raises(ValueError):
        fit_line(np.array([1.0, 2.0]), np.array([1.0, 2.0, 3.0]), DiagonalMetric(np.ones(2)))
    with pytest.raises(ValueError):
        CompoundSymmetryMetric(scale=1.0, rho=1.0, size=3)
    with pytest.raises(ValueError):
        CompoundSymmetryMetric(scale=0.0, rho=0.5, size=3)
