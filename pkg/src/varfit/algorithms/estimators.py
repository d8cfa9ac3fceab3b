"""
Difference-Based Variance Estimators.

This module estimates the residual variance sigma^2 of y_i = g(x_i) + e_i
without estimating the mean function g. Differences of responses cancel a
smooth trend; the remaining trend bias of the lag-k statistics grows like
k^2/n^2 and is removed by regressing the statistics on the squared lag.

Functions:
    - compute_lag_stats: Lag-k mean squared half-differences s_k (or z_k).
    - rice: First-order difference estimator.
    - tong_wang: Intercept of the lag regression (WLS, OLS or GLS).
    - muller_stadtmuller: Fixed-denominator weighted sum of z_k.
    - general_domain: Pairwise regression for covariates in any normed space.
    - confidence_interval / attach_interval: Normal-theory interval.
    - estimate_gamma4: Kurtosis from fourth powers of first differences.

The ``*_batch`` kernels evaluate the same estimators on arrays of shape
(..., n) and are what the Sample1D entry points call, so single and batched
evaluations agree bit for bit.
"""

import logging
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import norm

from varfit.algorithms.math.least_squares import (
    CompoundSymmetryMetric,
    DiagonalMetric,
    Metric,
    fit_line,
)
from varfit.exceptions import DataError, PreconditionError
from varfit.structures.records import (
    ConfidenceInterval,
    DenominatorMode,
    LagStats,
    NoiseMoments,
    RegressionFit,
    RegressionMethod,
    Sample1D,
    VarianceEstimate,
)

logger = logging.getLogger(__name__)

GAMMA4_FLOOR = 1.0 + 1e-9

Responses = Union[Sample1D, Sequence[float], np.ndarray]


# --- Bandwidths ---


def select_bandwidth(
    n: int, rule: Union[str, int], minimum: int = 2, rounding: str = "half-up"
) -> int:
    """
    Resolves a bandwidth rule to an integer lag count.

    ``sqrt`` gives n^(1/2) and ``cbrt`` gives n^(1/3), rounded half up or
    truncated (``rounding="floor"``, applied to the floating-point power, so
    1000^(1/3) gives 9); an integer (or digit string) is taken as is. Rule
    results are clamped to [minimum, n - 1].

    Args:
        n (int): Sample size.
        rule (Union[str, int]): 'sqrt', 'cbrt' or an explicit integer.
        minimum (int): Smallest admissible bandwidth for the estimator.
        rounding (str): 'half-up' or 'floor'.

    Returns:
        int: The bandwidth.

    Raises:
        ValueError: If the rule is unknown or no admissible bandwidth exists.
    """
    if minimum > n - 1:
        raise ValueError(f"No bandwidth >= {minimum} is admissible for n = {n}")
    if isinstance(rule, str) and rule.strip().isdigit():
        rule = int(rule)
    if isinstance(rule, (int, np.integer)) and not isinstance(rule, bool):
        return int(rule)
    if rule == "sqrt":
        raw = n**0.5
    elif rule == "cbrt":
        raw = n ** (1.0 / 3.0)
    else:
        raise ValueError(f"Unknown bandwidth rule: {rule!r}")
    if rounding == "half-up":
        raw += 0.5
    elif rounding != "floor":
        raise ValueError(f"Unknown rounding mode: {rounding!r}")
    chosen = min(max(math.floor(raw), minimum), n - 1)
    logger.debug("bandwidth rule %s at n=%d -> %d", rule, n, chosen)
    return chosen


def _check_tw_bandwidth(n: int, m: int) -> None:
    if m < 2:
        raise ValueError(f"Bandwidth m must be at least 2 to identify the intercept, got {m}")
    if m >= n:
        raise ValueError(f"Bandwidth m must be below n = {n}, got {m}")


def _check_ms_bandwidth(n: int, L: int) -> None:
    if L < 3:
        raise ValueError(f"Bandwidth L must be at least 3, got {L}")
    if L >= n:
        raise ValueError(f"Bandwidth L must be below n = {n}, got {L}")


# --- Lag statistics ---


def _responses(sample: Responses) -> np.ndarray:
    if isinstance(sample, Sample1D):
        return sample.y
    y = np.asarray(sample, dtype=float)
    if y.ndim != 1:
        raise ValueError("Responses must be a one-dimensional vector")
    if not np.all(np.isfinite(y)):
        raise ValueError("Responses contain non-finite values")
    return y


def _require_equal_spacing(sample: Sample1D) -> None:
    if not sample.is_equally_spaced:
        raise DataError(
            "Lag statistics assume the design x_i = i/n; "
            "use general_domain for other designs"
        )


def _lag_square_sums(y: np.ndarray, m: int, span: Optional[int] = None) -> np.ndarray:
    """Sums of (y[i+k] - y[i])^2 over i < n - k (or i < span) for k = 1..m."""
    n = y.shape[-1]
    out = np.empty(y.shape[:-1] + (m,))
    for k in range(1, m + 1):
        length = n - k if span is None else span
        diff = y[..., k : k + length] - y[..., :length]
        out[..., k - 1] = np.sum(diff * diff, axis=-1)
    return out


def _lag_design(n: int, m: int) -> Tuple[np.ndarray, np.ndarray, int]:
    """Returns (d_k, w_k, N) for the per-lag statistics."""
    k = np.arange(1, m + 1, dtype=float)
    total = n * m - m * (m + 1) // 2
    return k * k / float(n * n), (n - k) / total, total


def compute_lag_stats(
    sample: Sample1D, m: int, mode: DenominatorMode = DenominatorMode.PER_LAG
) -> LagStats:
    """
    Computes the lag statistics by direct summation, one pass per lag.

    Per-lag mode: s_k = sum_{i=1}^{n-k} (y_{i+k} - y_i)^2 / {2(n - k)}.
    Fixed-L mode (m plays the role of L): z_k uses only i = 1..n-L and the
    divisor 2(n - L).

    Args:
        sample (Sample1D): Equally spaced sample.
        m (int): Largest lag (L in fixed-L mode).
        mode (DenominatorMode): Normalization.

    Returns:
        LagStats: Statistics with d_k = k^2/n^2 and their weights.

    Raises:
        ValueError: If the bandwidth is out of range.
        DataError: If the design is not equally spaced.
    """
    mode = DenominatorMode(mode)
    n = sample.n
    if mode is DenominatorMode.PER_LAG:
        if not 1 <= m <= n - 1:
            raise ValueError(f"Lag count must lie in [1, {n - 1}], got {m}")
    else:
        _check_ms_bandwidth(n, m)
    _require_equal_spacing(sample)

    d, w, total = _lag_design(n, m)
    if mode is DenominatorMode.PER_LAG:
        k = np.arange(1, m + 1)
        stats = _lag_square_sums(sample.y, m) / (2.0 * (n - k))
    else:
        stats = _lag_square_sums(sample.y, m, span=n - m) / (2.0 * (n - m))
        w = np.full(m, 1.0 / m)
        total = m * (n - m)
    return LagStats(m=m, stats=stats, d=d, w=w, N=total, mode=mode)


# --- Rice ---


def rice_batch(y: np.ndarray) -> np.ndarray:
    """First-difference estimator along the last axis."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    if n < 2:
        raise ValueError(f"The first-difference estimator needs n >= 2, got {n}")
    return _lag_square_sums(y, 1)[..., 0] / (2.0 * (n - 1))


def rice(sample: Responses) -> VarianceEstimate:
    """
    First-order difference estimator sum (y_i - y_{i-1})^2 / {2(n - 1)}.

    Only the ordering of the design matters, so any ordered sample (or a bare
    response vector) is accepted.

    Args:
        sample (Responses): Sample1D or responses in design order.

    Returns:
        VarianceEstimate: The estimate with bandwidth 1.

    Raises:
        ValueError: If fewer than two responses are given.
    """
    return VarianceEstimate.from_raw(rice_batch(_responses(sample)), "rice", 1)


def lag_batch(y: np.ndarray, k: int) -> np.ndarray:
    """Single lag-k statistic s_k along the last axis."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    if not 1 <= k <= n - 1:
        raise ValueError(f"Lag must lie in [1, {n - 1}], got {k}")
    diff = y[..., k:] - y[..., :-k]
    return np.sum(diff * diff, axis=-1) / (2.0 * (n - k))


# --- Regression on lags ---


def _regression_metric(
    method: RegressionMethod, n: int, w: np.ndarray, noise: Optional[NoiseMoments]
) -> Metric:
    m = len(w)
    if method is RegressionMethod.WLS:
        return DiagonalMetric(w)
    if method is RegressionMethod.OLS:
        return DiagonalMetric(np.ones(m))
    noise = noise or NoiseMoments.normal()
    return CompoundSymmetryMetric(
        scale=noise.gamma4 * noise.sigma2**2 / n, rho=noise.rho, size=m
    )


def _fit_lags(
    stats: np.ndarray,
    n: int,
    m: int,
    method: RegressionMethod,
    noise: Optional[NoiseMoments],
) -> Tuple[np.ndarray, np.ndarray]:
    d, w, _ = _lag_design(n, m)
    return fit_line(d, stats, _regression_metric(method, n, w, noise))


def tong_wang_batch(
    y: np.ndarray,
    m: int,
    method: RegressionMethod = RegressionMethod.WLS,
    noise: Optional[NoiseMoments] = None,
) -> np.ndarray:
    """Raw lag-regression intercepts along the last axis of an equally spaced y."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    _check_tw_bandwidth(n, m)
    k = np.arange(1, m + 1)
    stats = _lag_square_sums(y, m) / (2.0 * (n - k))
    beta0, _ = _fit_lags(stats, n, m, RegressionMethod(method), noise)
    return beta0


def tong_wang(
    sample: Sample1D,
    m: int,
    method: RegressionMethod = RegressionMethod.WLS,
    noise: Optional[NoiseMoments] = None,
) -> VarianceEstimate:
    """
    Regresses s_k on d_k = k^2/n^2 for k = 1..m and returns the intercept.

    WLS weights the lags by w_k = (n - k)/N. GLS uses the compound-symmetry
    covariance gamma4 sigma^4 {(1 - rho) I + rho 11^T}/n of the lag statistics;
    with an intercept column it reproduces the OLS coefficients.

    Args:
        sample (Sample1D): Equally spaced sample.
        m (int): Number of lags, 2 <= m < n.
        method (RegressionMethod): WLS, OLS or GLS.
        noise (Optional[NoiseMoments]): Moments for the GLS covariance;
            normal errors with unit variance when omitted.

    Returns:
        VarianceEstimate: The intercept, with the full fit attached.

    Raises:
        ValueError: If m is out of range.
        DataError: If the design is not equally spaced.
    """
    method = RegressionMethod(method)
    _check_tw_bandwidth(sample.n, m)
    lags = compute_lag_stats(sample, m)
    beta0, beta1 = _fit_lags(lags.stats, sample.n, m, method, noise)
    fit = RegressionFit(beta0=float(beta0), beta1=float(beta1), method=method)
    return VarianceEstimate.from_raw(fit.beta0, f"tw-{method.value.lower()}", m, fit=fit)


# --- Fixed-denominator estimator ---


def ms_weights(L: int) -> np.ndarray:
    """
    Weights a_k = 3{3L^2 + 3L + 2 - 6(2L + 1)k + 10k^2} / {L(L - 1)(L - 2)}.

    Args:
        L (int): Bandwidth, at least 3.

    Returns:
        np.ndarray: a_1..a_L, summing to one.

    Raises:
        ValueError: If L < 3.
    """
    if L < 3:
        raise ValueError(f"Bandwidth L must be at least 3, got {L}")
    k = np.arange(1, L + 1, dtype=np.int64)
    numerator = 3 * (3 * L * L + 3 * L + 2 - 6 * (2 * L + 1) * k + 10 * k * k)
    a = numerator / float(L * (L - 1) * (L - 2))
    assert abs(math.fsum(a) - 1.0) < 1e-12, "weights must sum to one"
    return a


def muller_stadtmuller_batch(y: np.ndarray, L: int) -> np.ndarray:
    """Raw fixed-denominator estimates along the last axis."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    _check_ms_bandwidth(n, L)
    z = _lag_square_sums(y, L, span=n - L) / (2.0 * (n - L))
    return z @ ms_weights(L)


def muller_stadtmuller(sample: Sample1D, L: int) -> VarianceEstimate:
    """
    Weighted sum sum_k a_k z_k of the fixed-denominator lag statistics.

    Args:
        sample (Sample1D): Equally spaced sample.
        L (int): Bandwidth, 3 <= L <= n - 1.

    Returns:
        VarianceEstimate: The estimate (raw value may be negative).

    Raises:
        ValueError: If L is out of range.
        DataError: If the design is not equally spaced.
    """
    lags = compute_lag_stats(sample, L, DenominatorMode.FIXED_L)
    return VarianceEstimate.from_raw(float(lags.stats @ ms_weights(L)), "ms", L)


# --- General domains ---


def _as_points(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError("Points must be a vector or an (n, p) array")
    if not np.all(np.isfinite(pts)):
        raise ValueError("Points contain non-finite values")
    return pts


def rescale_blocks(
    points: np.ndarray, blocks: Optional[Sequence[Sequence[int]]] = None
) -> np.ndarray:
    """
    Maps each block of covariate columns affinely onto a [0, 1] range.

    Columns of one block are shifted by their own minimum and divided by the
    largest column range of the block, so distances inside a block keep their
    shape. By default every column is its own block.

    Args:
        points (np.ndarray): Covariates, shape (n,) or (n, p).
        blocks (Optional[Sequence[Sequence[int]]]): Column groups.

    Returns:
        np.ndarray: Rescaled covariates, shape (n, p).
    """
    pts = _as_points(points)
    if blocks is None:
        blocks = [[j] for j in range(pts.shape[1])]
    out = pts.copy()
    for block in blocks:
        cols = list(block)
        sub = pts[:, cols]
        lo = sub.min(axis=0)
        span = float(np.max(sub.max(axis=0) - lo))
        out[:, cols] = (sub - lo) / span if span > 0 else 0.0
    return out


def pair_count_threshold(points: np.ndarray, m0: int) -> float:
    """
    Squared-distance bandwidth retaining as many pairs as m0 lags would.

    On an equally spaced line the retained pairs are exactly lags 1..m0.

    Args:
        points (np.ndarray): Covariates, shape (n,) or (n, p).
        m0 (int): Lag-equivalent bandwidth, 1 <= m0 < n.

    Returns:
        float: Threshold on d_ij = ||x_i - x_j||^2.
    """
    pts = _as_points(points)
    n = len(pts)
    if not 1 <= m0 < n:
        raise ValueError(f"Lag-equivalent bandwidth must lie in [1, {n - 1}], got {m0}")
    count = n * m0 - m0 * (m0 + 1) // 2
    d = np.sort(pdist(pts, "sqeuclidean"))
    return float(d[count - 1]) * (1.0 + 1e-9)


def general_domain(points: np.ndarray, y: Sequence[float], m: float) -> VarianceEstimate:
    """
    Pairwise regression s_ij = beta0 + beta1 d_ij over pairs with d_ij <= m.

    s_ij = (y_i - y_j)^2 / 2 and d_ij = ||x_i - x_j||^2 over all i < j. Pairs
    of replicated design points (d_ij = 0) are kept. Ordinary least squares
    is used; on an equally spaced line this is the count-weighted fit of the
    lag means, i.e. the WLS lag regression.

    Args:
        points (np.ndarray): Covariates, shape (n,) or (n, p).
        y (Sequence[float]): Responses.
        m (float): Squared-distance bandwidth.

    Returns:
        VarianceEstimate: The intercept, with the fit attached.

    Raises:
        ValueError: If shapes disagree.
        PreconditionError: If fewer than two pairs are retained or all
            retained distances coincide.
    """
    pts = _as_points(points)
    resp = _responses(y)
    if len(resp) != len(pts):
        raise ValueError(f"{len(pts)} points but {len(resp)} responses")
    d = pdist(pts, "sqeuclidean")
    s = 0.5 * pdist(resp[:, None], "sqeuclidean")
    keep = d <= m
    count = int(np.count_nonzero(keep))
    if count < 2:
        raise PreconditionError(f"Bandwidth {m} retains {count} pair(s); need at least 2")
    beta0, beta1 = fit_line(d[keep], s[keep], DiagonalMetric(np.ones(count)))
    logger.debug("general-domain fit on %d pairs (m=%g)", count, m)
    fit = RegressionFit(beta0=float(beta0), beta1=float(beta1), method=RegressionMethod.OLS)
    return VarianceEstimate.from_raw(fit.beta0, "general", float(m), fit=fit)


# --- Inference ---


def confidence_interval(
    est: Union[VarianceEstimate, float], gamma4: float, n: int, alpha: float
) -> Tuple[float, float]:
    """
    Approximate 1 - alpha interval from the asymptotic normal law.

    [v / {1 + z sqrt((gamma4 - 1)/n)}, v / {1 - z sqrt((gamma4 - 1)/n)}] with
    z the upper alpha/2 normal quantile and v the (truncated) estimate.

    Raises:
        ValueError: If alpha is outside (0, 1) or gamma4 <= 1.
        PreconditionError: If n <= (gamma4 - 1) z^2.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if gamma4 <= 1:
        raise ValueError(f"gamma4 must exceed 1, got {gamma4}")
    value = est.value if isinstance(est, VarianceEstimate) else max(float(est), 0.0)
    z = float(norm.ppf(1.0 - alpha / 2.0))
    half = z * math.sqrt((gamma4 - 1.0) / n)
    if half >= 1.0:
        raise PreconditionError(
            f"Interval needs n > (gamma4 - 1) z^2 = {(gamma4 - 1.0) * z * z:.4g}, got n = {n}"
        )
    return value / (1.0 + half), value / (1.0 - half)


def attach_interval(
    est: VarianceEstimate, gamma4: float, n: int, alpha: float
) -> VarianceEstimate:
    """Returns a copy of est carrying its confidence interval."""
    lo, hi = confidence_interval(est, gamma4, n, alpha)
    return VarianceEstimate(
        value=est.value,
        raw_value=est.raw_value,
        method=est.method,
        bandwidth=est.bandwidth,
        truncated=est.truncated,
        df=est.df,
        ci=ConfidenceInterval(lo, hi, alpha),
        fit=est.fit,
    )


def estimate_gamma4(sample: Responses, sigma2_hat: float) -> float:
    """
    Kurtosis estimate from fourth powers of first differences.

    For a smooth trend E(e_i - e_{i-1})^4 = 2 mu4 + 6 sigma^4, so
    mu4 = max{(mean d^4 - 6 sigma^4)/2, sigma^4} and gamma4 = mu4/sigma^4,
    floored at 1 + 1e-9.

    Args:
        sample (Responses): Sample1D or responses in design order.
        sigma2_hat (float): Variance estimate, positive.

    Returns:
        float: The kurtosis estimate.

    Raises:
        ValueError: If n < 3 or sigma2_hat <= 0.
    """
    y = _responses(sample)
    if len(y) < 3:
        raise ValueError(f"Kurtosis estimation needs n >= 3, got {len(y)}")
    if not sigma2_hat > 0:
        raise ValueError(f"sigma2_hat must be positive, got {sigma2_hat}")
    s4 = sigma2_hat * sigma2_hat
    fourth = float(np.mean(np.diff(y) ** 4))
    mu4 = max((fourth - 6.0 * s4) / 2.0, s4)
    return max(mu4 / s4, GAMMA4_FLOOR)
