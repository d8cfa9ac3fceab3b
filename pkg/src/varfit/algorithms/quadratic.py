"""
Quadratic-Form Representation of the Lag Estimators.

Both lag-regression estimators are ratios y^T A y / tr(A) of a symmetric
banded matrix A:

    - D, for the weighted lag regression: band value -b_k at offset k on all
      n - k rows, tr(D) = 2N.
    - M, for the fixed-denominator estimator: band value -a_k at offset k on
      the first n - L rows, tr(M) = 2(n - L).

Writing an estimator this way gives its exact finite-sample moments for any
error law with finite fourth moment (see ``exact_mse``).

Functions:
    - tw_coefficients / ms_coefficients: Band coefficients b_k and a_k.
    - build_tw_matrix / build_ms_matrix: The matrices D and M.
    - build_lag_matrix: Matrix of a single lag statistic.
    - quad_form, traces, exact_mse: Evaluation and exact moments.
    - chi_square_df / chi_square_interval: Scaled chi-square approximation.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.stats import chi2

from varfit.algorithms.estimators import ms_weights
from varfit.exceptions import PreconditionError
from varfit.structures.banded import BandedSymmetric
from varfit.structures.records import ExactMoments, NoiseMoments, VarianceEstimate

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TWCoefficients:
    """
    Band coefficients b_0..b_{m+1} of D, with b_0 = b_{m+1} = 0.

    b_k = 1 - dbar (d_k - dbar) / sum_j w_j (d_j - dbar)^2 with dbar = sum w_k d_k.
    """

    m: int
    b: np.ndarray

    @property
    def interior(self) -> np.ndarray:
        """b_1..b_m."""
        return self.b[1:-1]


@dataclass(frozen=True, eq=False)
class MSCoefficients:
    """Weights a_0..a_L of M, with a_0 = 0."""

    L: int
    a: np.ndarray

    @property
    def interior(self) -> np.ndarray:
        """a_1..a_L."""
        return self.a[1:]


def _check_tw(n: int, m: int) -> None:
    if not 2 <= m < n:
        raise ValueError(f"Bandwidth m must satisfy 2 <= m < n = {n}, got {m}")


def tw_coefficients(n: int, m: int) -> TWCoefficients:
    """
    Computes b_k for the weighted lag regression with bandwidth m.

    The ratio defining b_k is invariant to rescaling d, so k^2 is used in
    place of k^2/n^2.

    Args:
        n (int): Sample size.
        m (int): Bandwidth, 2 <= m < n.

    Returns:
        TWCoefficients: The padded coefficient vector.
    """
    _check_tw(n, m)
    k = np.arange(1, m + 1, dtype=float)
    w = (n - k) / (n * m - m * (m + 1) // 2)
    d = k * k
    d_bar = float(np.dot(w, d))
    spread = float(np.dot(w, (d - d_bar) ** 2))
    b = np.zeros(m + 2)
    b[1:-1] = 1.0 - d_bar * (d - d_bar) / spread
    return TWCoefficients(m=m, b=b)


def ms_coefficients(L: int) -> MSCoefficients:
    """Pads the fixed-denominator weights with a_0 = 0."""
    return MSCoefficients(L=L, a=np.concatenate(([0.0], ms_weights(L))))


def build_tw_matrix(n: int, m: int) -> BandedSymmetric:
    """
    Builds D with y^T D y / tr(D) equal to the weighted lag-regression intercept.

    Row j (1-based) takes part in lag-k pairs as the left point when
    k <= n - j and as the right point when k <= j - 1, so its diagonal is
    sum_{k <= min(m, n-j)} b_k + sum_{k <= min(m, j-1)} b_k. Off-diagonals are
    -b_{|i-j|} for |i - j| <= m.

    Args:
        n (int): Dimension.
        m (int): Bandwidth, 2 <= m < n.

    Returns:
        BandedSymmetric: The matrix D; tr(D) = 2N.

    Raises:
        ValueError: If the bandwidth is out of range.
    """
    b = tw_coefficients(n, m).interior
    cum = np.concatenate(([0.0], np.cumsum(b)))
    j = np.arange(1, n + 1)
    diagonal = cum[np.minimum(m, n - j)] + cum[np.minimum(m, j - 1)]
    k = np.arange(1, m + 1)
    D = BandedSymmetric(diagonal, -b, n - k)

    total = n * m - m * (m + 1) // 2
    assert math.isclose(D.trace(), 2.0 * total, rel_tol=1e-9), "tr(D) must equal 2N"
    return D


def build_ms_matrix(n: int, L: int) -> BandedSymmetric:
    """
    Builds M with y^T M y / tr(M) equal to the fixed-denominator estimate.

    Diagonal: 1 + a_1 + ... + a_{j-1} for j <= L, 2 in the middle rows and
    a_{j+L-n} + ... + a_L for j > n - L. Off-diagonal k holds -a_k on the
    first n - L rows.

    Args:
        n (int): Dimension.
        L (int): Bandwidth, 3 <= L and 2L <= n.

    Returns:
        BandedSymmetric: The matrix M; tr(M) = 2(n - L).

    Raises:
        ValueError: If L < 3 or 2L > n.
    """
    if L < 3:
        raise ValueError(f"Bandwidth L must be at least 3, got {L}")
    if 2 * L > n:
        raise ValueError(f"The three-regime diagonal of M needs 2L <= n, got L = {L}, n = {n}")
    a = ms_weights(L)
    cum = np.concatenate(([0.0], np.cumsum(a)))
    j = np.arange(1, n + 1)
    # Row j is a left point for every k when j <= n - L, and a right point
    # for lags k in [max(1, j - n + L), min(L, j - 1)].
    lo = np.maximum(1, j - n + L)
    hi = np.minimum(L, j - 1)
    right = np.where(hi >= lo, cum[hi] - cum[lo - 1], 0.0)
    diagonal = (j <= n - L).astype(float) + right
    M = BandedSymmetric(diagonal, -a, np.full(L, n - L))

    assert math.isclose(M.trace(), 2.0 * (n - L), rel_tol=1e-9), "tr(M) must equal 2(n - L)"
    return M


def build_lag_matrix(n: int, k: int) -> BandedSymmetric:
    """
    Matrix of the single lag-k statistic; k = 1 gives the first-difference estimator.

    Raises:
        ValueError: Unless 1 <= k < n.
    """
    if not 1 <= k < n:
        raise ValueError(f"Lag must lie in [1, {n - 1}], got {k}")
    j = np.arange(1, n + 1)
    diagonal = (j <= n - k).astype(float) + (j > k).astype(float)
    band = np.zeros(k)
    band[-1] = -1.0
    extents = np.zeros(k, dtype=np.int64)
    extents[-1] = n - k
    return BandedSymmetric(diagonal, band, extents)


def quad_form(A: BandedSymmetric, y: np.ndarray) -> Union[float, np.ndarray]:
    """
    Evaluates y^T A y / tr(A) in O(n * bandwidth).

    Args:
        A (BandedSymmetric): The matrix.
        y (np.ndarray): Vector of length A.n, or a batch of shape (..., A.n).

    Returns:
        Union[float, np.ndarray]: The normalized quadratic form.

    Raises:
        ValueError: If the length does not match.
        PreconditionError: If tr(A) = 0.
    """
    trace = A.trace()
    if trace == 0.0:
        raise PreconditionError("Cannot normalize a quadratic form with zero trace")
    value = A.quadratic(y) / trace
    return float(value) if np.ndim(value) == 0 else value


def traces(A: BandedSymmetric) -> Tuple[float, float, float]:
    """Returns (tr(A), tr(A^2), tr[diag(A)^2])."""
    return A.trace(), A.trace_sq(), A.trace_diag_sq()


def exact_mse(A: BandedSymmetric, g: np.ndarray, noise: NoiseMoments) -> ExactMoments:
    """
    Exact moments of y^T A y / tr(A) for y = g + e, e i.i.d. with the given moments.

    MSE * tr(A)^2 = (g^T A g)^2 + 4 sigma^2 ||A g||^2
                  + 4 sigma^3 gamma3 (A g)^T diag(A)
                  + sigma^4 (gamma4 - 3) tr[diag(A)^2] + 2 sigma^4 tr(A^2).

    The first term is the squared bias, the remaining four the variance.

    Args:
        A (BandedSymmetric): The estimator matrix.
        g (np.ndarray): Mean vector g(x_i).
        noise (NoiseMoments): Error moments.

    Returns:
        ExactMoments: Bias, variance and MSE.

    Raises:
        ValueError: If len(g) != A.n.
        PreconditionError: If tr(A) = 0.
    """
    g = np.asarray(g, dtype=float)
    trA, trA2, trDiag = traces(A)
    if trA == 0.0:
        raise PreconditionError("Cannot normalize a quadratic form with zero trace")
    Ag = A.matvec(g)
    gAg = float(g @ Ag)
    s2 = noise.sigma2
    variance = (
        4.0 * s2 * float(Ag @ Ag)
        + 4.0 * s2**1.5 * noise.gamma3 * float(Ag @ A.diagonal)
        + s2 * s2 * (noise.gamma4 - 3.0) * trDiag
        + 2.0 * s2 * s2 * trA2
    ) / (trA * trA)
    return ExactMoments.from_parts(bias=gAg / trA, variance=variance)


def chi_square_df(A: BandedSymmetric) -> float:
    """
    Degrees of freedom nu = tr(A)^2 / tr(A^2) of the scaled chi-square law.

    Raises:
        PreconditionError: If tr(A^2) = 0.
    """
    trA, trA2, _ = traces(A)
    if not trA2 > 0:
        raise PreconditionError("Degenerate matrix: tr(A^2) = 0")
    return trA * trA / trA2


def chi_square_interval(
    est: VarianceEstimate, A: BandedSymmetric, alpha: float
) -> Tuple[float, float]:
    """
    Interval from the approximation sigma2_hat ~ (sigma^2 / nu) chi^2(nu).

    Args:
        est (VarianceEstimate): The (truncated) estimate.
        A (BandedSymmetric): Matrix of the estimator, for nu.
        alpha (float): Level, in (0, 1).

    Returns:
        Tuple[float, float]: [nu v / q_{1-alpha/2}, nu v / q_{alpha/2}].
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    nu = chi_square_df(A)
    upper = float(chi2.ppf(1.0 - alpha / 2.0, nu))
    lower = float(chi2.ppf(alpha / 2.0, nu))
    logger.debug("chi-square interval with nu = %.6g", nu)
    return nu * est.value / upper, nu * est.value / lower
