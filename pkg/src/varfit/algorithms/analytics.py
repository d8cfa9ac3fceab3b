"""
Asymptotic Analytics.

Closed-form large-sample quantities for the lag estimators, and checks of the
finite-sum identities behind them.

Functions:
    - trend_J: J = int_0^1 g'(x)^2 dx / 2, the constant of the lag bias J k^2/n^2.
    - expected_lag_bias: Leading bias of the lag-k statistic.
    - asymptotic_variance_lag / asymptotic_cov_lag: Moments of lag statistics.
    - asymptotic_mse_ms / optimal_L: MSE expansion and optimal bandwidth of the
      fixed-denominator estimator.
    - optimal_mse_comparison: Two-term optimal MSE of both lag estimators.
    - efficiency_bound: (gamma4 - 1) sigma^4 / n.
    - check_identities: Exact sums against their asymptotic expansions.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy.integrate import simpson

from varfit.algorithms.estimators import select_bandwidth
from varfit.algorithms.quadratic import build_ms_matrix, build_tw_matrix, tw_coefficients
from varfit.structures.records import NoiseMoments
from varfit.utils.generators import MeanFunction, get_mean_function

logger = logging.getLogger(__name__)

INTEGRATION_INTERVALS = 10_000

# Second-order coefficients of the optimal MSE expansions.
TW_SECOND_ORDER = math.sqrt(567) / 28
MS_SECOND_ORDER = math.sqrt(45990) / 35


@dataclass(frozen=True)
class TrendProfile:
    """Trend functional J of a mean function."""

    J: float

    def __post_init__(self):
        if not (math.isfinite(self.J) and self.J >= 0):
            raise ValueError(f"J must be finite and nonnegative, got {self.J}")


def trend_J(g: Union[MeanFunction, str]) -> TrendProfile:
    """
    Computes J = int_0^1 g'(x)^2 dx / 2 by composite Simpson on 10^4 intervals.

    The analytic derivative is used when the mean function carries one;
    otherwise g' comes from central differences on the same grid.

    Args:
        g (Union[MeanFunction, str]): Mean function or built-in name.

    Returns:
        TrendProfile: The trend functional.

    Raises:
        ArithmeticError: If g or g' is not finite on the grid.
    """
    if isinstance(g, str):
        g = get_mean_function(g)
    x = np.linspace(0.0, 1.0, INTEGRATION_INTERVALS + 1)
    if g.derivative is not None:
        slope = np.asarray(g.derivative(x), dtype=float)
    else:
        values = g(x)
        if not np.all(np.isfinite(values)):
            raise ArithmeticError(f"Mean function {g.name} is not finite on [0, 1]")
        slope = np.gradient(values, x, edge_order=2)
    if not np.all(np.isfinite(slope)):
        raise ArithmeticError(f"Derivative of {g.name} is not finite on [0, 1]")
    return TrendProfile(J=float(simpson(slope * slope, x=x)) / 2.0)


def expected_lag_bias(J: Union[float, TrendProfile], k: int, n: int) -> float:
    """
    Leading bias J k^2 / n^2 of the lag-k statistic.

    The expansion needs k = o(n); a warning is logged when k > n^(3/4).
    """
    if isinstance(J, TrendProfile):
        J = J.J
    if k > n**0.75:
        logger.warning("lag %d exceeds n^(3/4) = %.1f; the bias expansion may be poor", k, n**0.75)
    return J * k * k / (n * n)


def asymptotic_variance_lag(k: int, n: int, noise: NoiseMoments) -> float:
    """Limiting variance gamma4 sigma^4 / n of a single lag statistic."""
    if not 1 <= k < n:
        raise ValueError(f"Lag must lie in [1, {n - 1}], got {k}")
    return noise.gamma4 * noise.sigma2**2 / n


def asymptotic_cov_lag(b: int, k: int, n: int, noise: NoiseMoments) -> float:
    """
    Leading term of Cov(s_b, s_k) for lags b < k.

    (2n - 2k - b)(gamma4 - 1) sigma^4 / {2 (n - b)(n - k)}; n times this tends
    to (gamma4 - 1) sigma^4.

    Raises:
        ValueError: Unless 1 <= b < k < n.
    """
    if not 1 <= b < k < n:
        raise ValueError(f"Lags must satisfy 1 <= b < k < n, got b={b}, k={k}, n={n}")
    return (2 * n - 2 * k - b) * noise.var_eps2 / (2.0 * (n - b) * (n - k))


def efficiency_bound(n: int, noise: NoiseMoments) -> float:
    """Smallest attainable asymptotic variance (gamma4 - 1) sigma^4 / n."""
    return noise.var_eps2 / n


def asymptotic_mse_ms(n: int, L: int, noise: NoiseMoments) -> float:
    """
    MSE expansion of the fixed-denominator estimator.

    var(e^2)/n + 73 L var(e^2)/(70 n^2) + 9 sigma^4/(L n), with the
    o(L^2/n^2) bias left out.

    Raises:
        ValueError: If L < 3.
    """
    if L < 3:
        raise ValueError(f"Bandwidth L must be at least 3, got {L}")
    v = noise.var_eps2
    return v / n + 73.0 * L * v / (70.0 * n * n) + 9.0 * noise.sigma2**2 / (L * n)


def optimal_L(n: int, noise: NoiseMoments) -> int:
    """
    Minimizer sqrt(630 n sigma^4 / {73 var(e^2)}) of the MSE expansion.

    Rounded half up and clamped to [3, n - 1].

    Raises:
        ValueError: If n < 10.
    """
    if n < 10:
        raise ValueError(f"optimal_L needs n >= 10, got {n}")
    raw = math.sqrt(630.0 * n * noise.sigma2**2 / (73.0 * noise.var_eps2))
    return min(max(math.floor(raw + 0.5), 3), n - 1)


def optimal_mse_comparison(n: int, noise: NoiseMoments) -> Tuple[float, float, float]:
    """
    Two-term MSE of both lag estimators at their optimal bandwidths.

    Both equal var(e^2)/n + c {sigma^4 var(e^2)}^(1/2) n^(-3/2) with
    c = sqrt(567)/28 for the weighted lag regression and sqrt(45990)/35 for
    the fixed-denominator estimator.

    Returns:
        Tuple[float, float, float]: (mse_tw_opt, mse_ms_opt, ratio of the
        second-order coefficients).

    Raises:
        ValueError: If n < 30.
    """
    if n < 30:
        raise ValueError(f"optimal_mse_comparison needs n >= 30, got {n}")
    first = efficiency_bound(n, noise)
    second = math.sqrt(noise.sigma2**2 * noise.var_eps2) * n**-1.5
    return (
        first + TW_SECOND_ORDER * second,
        first + MS_SECOND_ORDER * second,
        MS_SECOND_ORDER / TW_SECOND_ORDER,
    )


@dataclass(frozen=True)
class IdentityReport:
    """
    Exact sums of the estimator coefficients next to their expansions.

    Relative deviations of the b_k sums are scaled by m; those of the M
    traces by the predicted value. Trace identities are exact and reported as
    absolute differences.
    """

    n: int
    m: int
    L: Optional[int]
    sum_b: float
    sum_b_predicted: float
    sum_b_rel_dev: float
    partial_sums_max_rel_dev: float
    sum_b_sq: float
    sum_b_sq_predicted: float
    sum_b_sq_rel_dev: float
    trace_D: float
    trace_D_dev: float
    trace_M: Optional[float] = None
    trace_M_dev: Optional[float] = None
    diag_sq_M: Optional[float] = None
    diag_sq_M_predicted: Optional[float] = None
    diag_sq_M_rel_dev: Optional[float] = None
    trace_sq_M: Optional[float] = None
    trace_sq_M_predicted: Optional[float] = None
    trace_sq_M_rel_dev: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def check_identities(n: int, m: int, L: Optional[int] = None) -> IdentityReport:
    """
    Compares exact coefficient sums and traces with their expansions.

    For the weighted lag regression:
        sum_k b_k        ~ m - 5 m^2 / (16 n)
        sum_{k>=j} b_k   ~ m - 9j/4 + 5 j^3 / (4 m^2)
        sum_k b_k^2      ~ 9m/4
        tr(D)            = 2N exactly
    For the fixed-denominator estimator with bandwidth L (default round(sqrt n)):
        tr(M)            = 2(n - L) exactly
        tr[diag(M)^2]    ~ 4n - 134L/35
        tr(M^2)          ~ 4n - 134L/35 + 18n/L

    The expansions assume m = o(n); a warning is logged when m > n^(2/3).

    Args:
        n (int): Sample size.
        m (int): Bandwidth of the lag regression, 2 <= m < n.
        L (Optional[int]): Bandwidth of M; skipped when 2L > n.

    Returns:
        IdentityReport: Values and deviations.
    """
    if m > n ** (2.0 / 3.0):
        logger.warning("m = %d exceeds n^(2/3) = %.1f; expansions may be inaccurate", m, n ** (2.0 / 3.0))
    b = tw_coefficients(n, m).interior
    sum_b = math.fsum(b)
    sum_b_pred = m - 5.0 * m * m / (16.0 * n)
    sum_b_sq = math.fsum(b * b)

    j = np.arange(1, m + 1, dtype=float)
    tail = np.cumsum(b[::-1])[::-1]
    tail_pred = m - 9.0 * j / 4.0 + 5.0 * j**3 / (4.0 * m * m)
    N = n * m - m * (m + 1) // 2
    trace_D = build_tw_matrix(n, m).trace()

    fields: Dict[str, Any] = dict(
        n=n,
        m=m,
        L=None,
        sum_b=sum_b,
        sum_b_predicted=sum_b_pred,
        sum_b_rel_dev=abs(sum_b - sum_b_pred) / m,
        partial_sums_max_rel_dev=float(np.max(np.abs(tail - tail_pred))) / m,
        sum_b_sq=sum_b_sq,
        sum_b_sq_predicted=2.25 * m,
        sum_b_sq_rel_dev=abs(sum_b_sq - 2.25 * m) / m,
        trace_D=trace_D,
        trace_D_dev=abs(trace_D - 2.0 * N),
    )

    if L is None:
        L = select_bandwidth(n, "sqrt", minimum=3) if n >= 4 else None
    if L is not None and L >= 3 and 2 * L <= n:
        M = build_ms_matrix(n, L)
        diag_pred = 4.0 * n - 134.0 * L / 35.0
        sq_pred = diag_pred + 18.0 * n / L
        diag_sq, trace_sq = M.trace_diag_sq(), M.trace_sq()
        fields.update(
            L=L,
            trace_M=M.trace(),
            trace_M_dev=abs(M.trace() - 2.0 * (n - L)),
            diag_sq_M=diag_sq,
            diag_sq_M_predicted=diag_pred,
            diag_sq_M_rel_dev=abs(diag_sq - diag_pred) / diag_pred,
            trace_sq_M=trace_sq,
            trace_sq_M_predicted=sq_pred,
            trace_sq_M_rel_dev=abs(trace_sq - sq_pred) / sq_pred,
        )
    elif L is not None:
        logger.info("skipping M identities: L = %d needs 3 <= L and 2L <= n = %d", L, n)
    return IdentityReport(**fields)
