import math

import numpy as np
import pytest
from varfit.algorithms.estimators import (
    GAMMA4_FLOOR,
    attach_interval,
    compute_lag_stats,
    confidence_interval,
    estimate_gamma4,
    general_domain,
    lag_batch,
    ms_weights,
    muller_stadtmuller,
    muller_stadtmuller_batch,
    pair_count_threshold,
    rescale_blocks,
    rice,
    select_bandwidth,
    tong_wang,
    tong_wang_batch,
)
from varfit.exceptions import DataError, PreconditionError
from varfit.structures.records import (
    DenominatorMode,
    NoiseMoments,
    RegressionMethod,
    Sample1D,
    VarianceEstimate,
)
from varfit.utils.generators import synthetic_sample

# --- Bandwidths ---


@pytest.mark.parametrize(
    "n, rule, rounding, expected",
    [
        (100, "sqrt", "half-up", 10),
        (1000, "sqrt", "half-up", 32),
        (1000, "sqrt", "floor", 31),
        (30, "sqrt", "half-up", 5),
        (30, "cbrt", "half-up", 3),
        (100, "cbrt", "half-up", 5),
        (100, "cbrt", "floor", 4),
        (1000, "cbrt", "half-up", 10),
        (1000, "cbrt", "floor", 9),
        (50, 7, "half-up", 7),
        (50, "12", "floor", 12),
    ],
)
def test_select_bandwidth(n, rule, rounding, expected):
    """Rules round half up by default; floor truncates the floating-point power."""
    assert select_bandwidth(n, rule, rounding=rounding) == expected


def test_select_bandwidth_clamps():
    """Rule results are clamped to [minimum, n - 1]."""
    assert select_bandwidth(4, "sqrt", minimum=3) == 3
    assert select_bandwidth(8, "cbrt", minimum=3) == 3


def test_select_bandwidth_errors():
    with pytest.raises(ValueError, match="Unknown bandwidth rule"):
        select_bandwidth(100, "log")
    with pytest.raises(ValueError, match="rounding"):
        select_bandwidth(100, "sqrt", rounding="ceil")
    with pytest.raises(ValueError, match="admissible"):
        select_bandwidth(3, "sqrt", minimum=3)


# --- Lag statistics ---


def test_lag_stats_alternating(alternating_sample):
    """Odd lags of an alternating sequence give 2, even lags 0."""
    lags = compute_lag_stats(alternating_sample, 4)
    assert lags.mode is DenominatorMode.PER_LAG
    assert pytest.approx(lags.stats) == [2.0, 0.0, 2.0, 0.0]
    assert pytest.approx(lags.d) == [k * k / 400.0 for k in range(1, 5)]
    assert lags.N == 70
    assert pytest.approx(lags.w) == [19 / 70, 18 / 70, 17 / 70, 16 / 70]
    assert pytest.approx(float(np.sum(lags.w))) == 1.0


def test_lag_stats_fixed_denominator(alternating_sample):
    """Fixed-L statistics use rows 1..n-L and equal weights 1/L."""
    lags = compute_lag_stats(alternating_sample, 3, DenominatorMode.FIXED_L)
    assert pytest.approx(lags.stats) == [2.0, 0.0, 2.0]
    assert pytest.approx(lags.w) == [1 / 3, 1 / 3, 1 / 3]
    assert lags.N == 51


def test_lag_stats_definition():
    """s_k equals the direct double sum."""
    y = np.array([0.3, -1.2, 2.0, 0.7, 0.0, 1.1, -0.4])
    lags = compute_lag_stats(Sample1D.equally_spaced(y), 3)
    for k in (1, 2, 3):
        direct = sum((y[i + k] - y[i]) ** 2 for i in range(len(y) - k)) / (2 * (len(y) - k))
        assert pytest.approx(lags.stats[k - 1]) == direct
        assert pytest.approx(float(lag_batch(y, k))) == direct


def test_lag_stats_errors(alternating_sample):
    with pytest.raises(ValueError):
        compute_lag_stats(alternating_sample, 20)
    with pytest.raises(ValueError):
        compute_lag_stats(alternating_sample, 2, DenominatorMode.FIXED_L)
    with pytest.raises(DataError):
        compute_lag_stats(Sample1D([0.1, 0.5, 0.6, 0.9], [1.0, 2.0, 3.0, 4.0]), 2)


# --- Rice ---


def test_rice_alternating(alternating_sample):
    est = rice(alternating_sample)
    assert est.method == "rice"
    assert est.bandwidth == 1
    assert pytest.approx(est.value) == 2.0


def test_rice_accepts_vectors():
    """Only the ordering matters, so a bare response vector is accepted."""
    assert pytest.approx(rice([0.0, 1.0, 2.0, 3.0]).value) == 0.5
    assert pytest.approx(rice([1.0, 3.0]).value) == 2.0
    with pytest.raises(ValueError):
        rice([1.0])


# --- Lag regression ---


def test_tong_wang_linear_trend_is_unbiased():
    """A linear mean gives s_k = 12.5 d_k exactly, so the intercept vanishes."""
    n = 50
    sample = Sample1D.equally_spaced(5.0 * np.arange(1, n + 1) / n)
    est = tong_wang(sample, 5)
    assert abs(est.raw_value) < 1e-12
    assert pytest.approx(est.fit.beta1, rel=1e-9) == 12.5
    assert est.method == "tw-wls"
    assert est.bandwidth == 5


def test_tong_wang_noisy(noisy_sample):
    """A seeded N(0, 1) sample gives an estimate near one."""
    est = tong_wang(noisy_sample, 14)
    assert abs(est.value - 1.0) < 0.4
    assert not est.truncated


def test_tong_wang_gls_equals_ols(noisy_sample):
    """The compound-symmetry GLS fit coincides with OLS for any kurtosis."""
    ols = tong_wang(noisy_sample, 10, RegressionMethod.OLS)
    gls = tong_wang(noisy_sample, 10, RegressionMethod.GLS)
    heavy = tong_wang(noisy_sample, 10, "GLS", NoiseMoments(sigma2=1.0, gamma4=9.0))
    assert pytest.approx(gls.raw_value, rel=1e-12) == ols.raw_value
    assert pytest.approx(heavy.raw_value, rel=1e-12) == ols.raw_value
    assert gls.method == "tw-gls"


@pytest.mark.parametrize("n", [30, 100, 1000, 10_000])
def test_gls_equals_ols_grid(n):
    """GLS and OLS lag regressions agree for every bandwidth and kurtosis."""
    sample = synthetic_sample(n, "g2", 1.0, seed=n)
    for m in sorted({2, 5, int(math.sqrt(n)), int(n ** (2 / 3))}):
        ols = tong_wang(sample, m, RegressionMethod.OLS).raw_value
        for gamma4 in (1.5, 3.0, 9.0):
            gls = tong_wang(sample, m, RegressionMethod.GLS, NoiseMoments(sigma2=1.0, gamma4=gamma4))
            assert pytest.approx(gls.raw_value, rel=1e-12) == ols


def test_tong_wang_batch_agrees(noisy_sample):
    """Batched and single evaluations agree."""
    other = synthetic_sample(200, "g3", 0.25, seed=8)
    batch = tong_wang_batch(np.stack([noisy_sample.y, other.y]), 10)
    assert batch.shape == (2,)
    assert pytest.approx(batch[0], rel=1e-12) == tong_wang(noisy_sample, 10).raw_value
    assert pytest.approx(batch[1], rel=1e-12) == tong_wang(other, 10).raw_value


def test_tong_wang_errors(alternating_sample):
    with pytest.raises(ValueError):
        tong_wang(alternating_sample, 1)
    with pytest.raises(ValueError):
        tong_wang(alternating_sample, 20)
    with pytest.raises(DataError):
        tong_wang(Sample1D([0.1, 0.5, 0.6, 0.9], [1.0, 2.0, 3.0, 4.0]), 2)


# --- Fixed-denominator estimator ---


def test_ms_weights_small_bandwidths():
    """L = 3 gives (3, -3, 1); the weights sum to one and cancel k^2."""
    assert pytest.approx(ms_weights(3)) == [3.0, -3.0, 1.0]
    assert pytest.approx(ms_weights(4)) == [2.25, -0.75, -1.25, 0.75]
    for L in (3, 4, 9, 25):
        a = ms_weights(L)
        k = np.arange(1, L + 1)
        assert pytest.approx(math.fsum(a)) == 1.0
        assert abs(float(np.dot(a, k * k))) < 1e-9 * L * L


@pytest.mark.parametrize("L, expected", [(3, 19.0), (4, 7.75), (5, 4.6)])
def test_ms_weights_squared_sum(L, expected):
    assert pytest.approx(float(np.sum(ms_weights(L) ** 2))) == expected


def test_ms_alternating(alternating_sample):
    """3 z_1 - 3 z_2 + z_3 with z = (2, 0, 2)."""
    est = muller_stadtmuller(alternating_sample, 3)
    assert est.method == "ms"
    assert pytest.approx(est.raw_value) == 8.0


def test_ms_linear_trend():
    """A linear mean is cancelled exactly."""
    n = 40
    sample = Sample1D.equally_spaced(5.0 * np.arange(1, n + 1) / n)
    assert abs(muller_stadtmuller(sample, 6).raw_value) < 1e-12


def test_ms_batch_and_errors(noisy_sample):
    single = muller_stadtmuller(noisy_sample, 7).raw_value
    assert pytest.approx(float(muller_stadtmuller_batch(noisy_sample.y, 7)), rel=1e-12) == single
    with pytest.raises(ValueError):
        ms_weights(2)
    with pytest.raises(ValueError):
        muller_stadtmuller(noisy_sample, 2)


# --- General domains ---


def test_general_domain_matches_lag_regression(noisy_sample):
    """On an equally spaced line the pairwise fit is the weighted lag regression."""
    threshold = pair_count_threshold(noisy_sample.x, 12)
    est = general_domain(noisy_sample.x, noisy_sample.y, threshold)
    assert est.method == "general"
    assert est.bandwidth == threshold
    assert pytest.approx(est.raw_value, rel=1e-12) == tong_wang(noisy_sample, 12).raw_value



def _brute_force_pairs(x, y, threshold):
    """Intercept of an OLS line through every (d_ij, s_ij) with d_ij <= threshold."""
    d, s = [], []
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            dij = (x[i] - x[j]) ** 2
            if dij <= threshold:
                d.append(dij)
                s.append(0.5 * (y[i] - y[j]) ** 2)
    slope, intercept = np.polyfit(np.array(d), np.array(s), 1)
    return intercept


@pytest.mark.parametrize("n, m", [(20, 2), (20, 5), (57, 7), (100, 3), (100, 10)])
def test_general_domain_equals_lag_regression_small(n, m):
    """Pairwise fit on a line: WLS lag regression to 1e-12, pair enumeration as oracle."""
    sample = synthetic_sample(n, "g2", 1.0, seed=n + m)
    threshold = ((m + 0.5) / n) ** 2
    est = general_domain(sample.x, sample.y, threshold)
    assert pytest.approx(est.raw_value, rel=1e-12) == tong_wang(sample, m).raw_value
    assert pytest.approx(est.raw_value, rel=1e-9) == _brute_force_pairs(sample.x, sample.y, threshold)


def test_general_domain_grid_nearest_neighbours():
    """Nearest-neighbour pairs on a grid share one distance up to rounding."""
    u, v = np.meshgrid(np.linspace(0, 1, 6), np.linspace(0, 1, 6))
    points = np.column_stack([u.ravel(), v.ravel()])
    y = np.random.default_rng(9).standard_normal(len(points))
    with pytest.raises(PreconditionError, match="identical"):
        general_domain(points, y, 0.04 * 1.01)
    est = general_domain(points, y, 0.08 * 1.01)
    assert np.isfinite(est.raw_value)
    assert abs(est.fit.beta1) < 1e3


@pytest.mark.parametrize("shift, scale", [(10.0, 1.0), (0.0, 3.0), (-4.0, 0.5)])
def test_location_scale_equivariance(noisy_sample, shift, scale):
    """Adding a constant leaves every estimate unchanged; scaling by a multiplies it by a^2."""
    moved = Sample1D(noisy_sample.x, scale * noisy_sample.y + shift)
    factor = scale * scale
    pairs = [
        (rice(moved), rice(noisy_sample)),
        (tong_wang(moved, 14), tong_wang(noisy_sample, 14)),
        (muller_stadtmuller(moved, 9), muller_stadtmuller(noisy_sample, 9)),
        (
            general_domain(moved.x, moved.y, ((12.5) / 200) ** 2),
            general_domain(noisy_sample.x, noisy_sample.y, ((12.5) / 200) ** 2),
        ),
    ]
    for after, before in pairs:
        assert pytest.approx(after.raw_value, rel=1e-10) == factor * before.raw_value


def test_pair_count_threshold():
    """With m0 = 2 on five grid points the 7th smallest distance is lag 2."""
    x = np.arange(1, 6) / 5.0
    assert pytest.approx(pair_count_threshold(x, 2), rel=1e-8) == 4.0 / 25.0
    with pytest.raises(ValueError):
        pair_count_threshold(x, 5)


def test_general_domain_two_dimensions():
    """Pure noise on a 30 x 30 grid."""
    u, v = np.meshgrid(np.linspace(0, 1, 30), np.linspace(0, 1, 30))
    points = np.column_stack([u.ravel(), v.ravel()])
    y = np.random.default_rng(5).standard_normal(len(points))
    est = general_domain(points, y, pair_count_threshold(points, 30))
    assert abs(est.raw_value - 1.0) < 0.35


def test_general_domain_keeps_replicated_points():
    """Pairs at distance zero enter the fit."""
    x = np.array([0.0, 0.0, 1.0, 1.0, 2.0])
    y = np.array([1.0, 3.0, 2.0, 2.0, 5.0])
    est = general_domain(x, y, 1.0)
    # d = 0 pairs: s = 2 and 0; d = 1 pairs: s = 0.5, 0.5, 0.5, 0.5, 4.5, 4.5.
    assert pytest.approx(est.raw_value) == 1.0
    assert pytest.approx(est.fit.beta1) == 0.833333333333


def test_general_domain_errors():
    x = np.array([0.0, 1.0, 2.0])
    with pytest.raises(PreconditionError):
        general_domain(x, [1.0, 2.0, 3.0], 0.5)
    with pytest.raises(PreconditionError):
        general_domain(x, [1.0, 2.0, 3.0], 1.0)
    with pytest.raises(ValueError):
        general_domain(x, [1.0, 2.0], 1.0)


def test_rescale_blocks():
    """Each block maps onto [0, 1] by its largest column range."""
    pts = np.array([[0.0, 10.0], [1.0, 20.0], [2.0, 30.0]])
    np.testing.assert_allclose(rescale_blocks(pts), [[0, 0], [0.5, 0.5], [1, 1]])
    np.testing.assert_allclose(
        rescale_blocks(pts, [[0, 1]]), [[0, 0], [0.05, 0.5], [0.1, 1]]
    )


# --- Inference ---


def test_confidence_interval_example():
    """v = 1, gamma4 = 3, n = 100, alpha = 0.05."""
    lo, hi = confidence_interval(1.0, 3.0, 100, 0.05)
    assert pytest.approx(lo, abs=1e-5) == 0.78297
    assert pytest.approx(hi, abs=1e-5) == 1.38347


def test_confidence_interval_preconditions():
    """n must exceed (gamma4 - 1) z^2."""
    assert confidence_interval(1.0, 3.0, 8, 0.05)[1] > 1.0
    with pytest.raises(PreconditionError):
        confidence_interval(1.0, 3.0, 7, 0.05)
    with pytest.raises(ValueError):
        confidence_interval(1.0, 3.0, 100, 1.5)
    with pytest.raises(ValueError):
        confidence_interval(1.0, 1.0, 100, 0.05)


def test_confidence_interval_truncated():
    """A truncated estimate gives the degenerate interval [0, 0]."""
    est = VarianceEstimate.from_raw(-0.3, "ms", 3)
    assert confidence_interval(est, 3.0, 100, 0.1) == (0.0, 0.0)


def test_attach_interval(noisy_sample):
    est = attach_interval(tong_wang(noisy_sample, 14), 3.0, 200, 0.05)
    assert est.ci.alpha == 0.05
    assert est.ci.lo < est.value < est.ci.hi
    assert est.fit is not None


def test_estimate_gamma4_normal():
    """Normal errors give a kurtosis near 3."""
    y = np.random.default_rng(21).standard_normal(400_000)
    assert 2.8 < estimate_gamma4(y, 1.0) < 3.2


def test_estimate_gamma4_floor():
    """A light-tailed sequence is clamped to the floor."""
    y = [(-1.0) ** i for i in range(10)]
    assert estimate_gamma4(y, 2.0) == GAMMA4_FLOOR


def test_estimate_gamma4_errors():
    with pytest.raises(ValueError):
        estimate_gamma4([1.0, 2.0, 3.0], 0.0)
    with pytest.raises(ValueError):
        estimate_gamma4([1.0, 2.0], 1.0)
