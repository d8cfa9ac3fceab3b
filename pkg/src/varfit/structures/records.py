"""
Varfit: Value Records.

Immutable records shared by the estimators, the analytics and the simulator.
Validation happens once, at construction, so every downstream routine may rely
on the stated invariants.

Classes:
    1. Sample1D: Ordered design points and responses of one dataset.
    2. NoiseMoments: Variance, skewness and kurtosis of the error law.
    3. LagStats: Lag-k mean squared half-differences with their covariates.
    4. RegressionFit: Intercept and slope of the lag regression.
    5. ConfidenceInterval: Interval for the residual variance.
    6. VarianceEstimate: Output of every variance estimator.
    7. ExactMoments: Bias, variance and MSE of a quadratic-form estimator.
"""

import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Any, Dict, Optional, Sequence

import numpy as np

# Relative tolerance of the x_i = i/n test on a Sample1D.
EQUAL_SPACING_RTOL = 1e-12


def _frozen_array(values: Any, name: str) -> np.ndarray:
    """Copies values into a read-only float vector."""
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a one-dimensional vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


def equally_spaced_grid(n: int) -> np.ndarray:
    """Returns the design x_i = i/n for i = 1..n."""
    return np.arange(1, n + 1, dtype=float) / n


@dataclass(frozen=True, eq=False)
class Sample1D:
    """
    Ordered design points and responses for one regression dataset.

    Attributes:
        x (np.ndarray): Nondecreasing design points.
        y (np.ndarray): Responses, same length as x.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _frozen_array(self.x, "x")
        y = _frozen_array(self.y, "y")
        if len(x) != len(y):
            raise ValueError(f"x and y lengths differ ({len(x)} != {len(y)})")
        if len(y) < 3:
            raise ValueError(f"A sample needs at least 3 observations, got {len(y)}")
        if np.any(np.diff(x) < 0):
            raise ValueError("Design points must be nondecreasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def equally_spaced(cls, y: Sequence[float]) -> "Sample1D":
        """
        Builds a sample on the grid x_i = i/n.

        Args:
            y (Sequence[float]): Responses in design order.

        Returns:
            Sample1D: The sample with an exact equally spaced design.
        """
        y_arr = np.asarray(y, dtype=float)
        return cls(equally_spaced_grid(len(y_arr)), y_arr)

    @property
    def n(self) -> int:
        """Returns the sample size."""
        return len(self.y)

    @property
    def is_equally_spaced(self) -> bool:
        """True iff x_i = i/n for every i within relative tolerance 1e-12."""
        grid = equally_spaced_grid(self.n)
        return bool(np.all(np.abs(self.x - grid) <= EQUAL_SPACING_RTOL * grid))


@dataclass(frozen=True)
class NoiseMoments:
    """
    Moments of the error law.

    Attributes:
        sigma2 (float): Variance of the errors.
        gamma3 (float): Standardized third moment.
        gamma4 (float): Standardized fourth moment; must exceed 1.
    """

    sigma2: float
    gamma3: float = 0.0
    gamma4: float = 3.0

    def __post_init__(self):
        for name in ("sigma2", "gamma3", "gamma4"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.gamma4 <= 1:
            raise ValueError(f"gamma4 must exceed 1, got {self.gamma4}")

    @classmethod
    def normal(cls, sigma2: float = 1.0) -> "NoiseMoments":
        """Moments of N(0, sigma2) errors (gamma3 = 0, gamma4 = 3)."""
        return cls(sigma2=sigma2, gamma3=0.0, gamma4=3.0)

    @property
    def rho(self) -> float:
        """Limiting correlation (gamma4 - 1) / gamma4 between lag statistics."""
        return (self.gamma4 - 1.0) / self.gamma4

    @property
    def var_eps2(self) -> float:
        """Variance of the squared error, (gamma4 - 1) sigma^4."""
        return (self.gamma4 - 1.0) * self.sigma2**2


class DenominatorMode(str, Enum):
    """How lag statistics are normalized."""

    PER_LAG = "per-lag"
    FIXED_L = "fixed-L"


class RegressionMethod(str, Enum):
    """Least squares flavour used for the lag regression."""

    WLS = "WLS"
    OLS = "OLS"
    GLS = "GLS"


@dataclass(frozen=True, eq=False)
class LagStats:
    """
    Lag statistics s_k (or z_k) with squared-lag covariates.

    Attributes:
        m (int): Largest lag.
        stats (np.ndarray): Statistic per lag k = 1..m.
        d (np.ndarray): Covariates d_k = k^2 / n^2.
        w (np.ndarray): Weights; (n - k)/N in per-lag mode, 1/L in fixed-L mode.
        N (int): Number of squared differences entering the statistics.
        mode (DenominatorMode): Normalization used.
    """

    m: int
    stats: np.ndarray
    d: np.ndarray
    w: np.ndarray
    N: int
    mode: DenominatorMode


@dataclass(frozen=True)
class RegressionFit:
    """Intercept and slope of s_k = beta0 + beta1 d_k."""

    beta0: float
    beta1: float
    method: RegressionMethod

    def __post_init__(self):
        if not (math.isfinite(self.beta0) and math.isfinite(self.beta1)):
            raise ArithmeticError("Regression coefficients are not finite")


@dataclass(frozen=True)
class ConfidenceInterval:
    """Approximate 1 - alpha interval for sigma^2."""

    lo: float
    hi: float
    alpha: float

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi:
            raise ValueError(f"Invalid interval [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class VarianceEstimate:
    """
    Output of a variance estimator.

    ``value`` is the estimate truncated at zero; ``raw_value`` keeps the
    untruncated number for histograms and exact comparisons.
    """

    value: float
    raw_value: float
    method: str
    bandwidth: float
    truncated: bool
    df: Optional[float] = None
    ci: Optional[ConfidenceInterval] = None
    fit: Optional[RegressionFit] = field(default=None, compare=False)

    def __post_init__(self):
        if self.value != max(self.raw_value, 0.0):
            raise ValueError("value must equal max(raw_value, 0)")
        if self.truncated != (self.raw_value < 0):
            raise ValueError("truncated flag must equal raw_value < 0")

    @classmethod
    def from_raw(
        cls, raw_value: float, method: str, bandwidth: float, **extra: Any
    ) -> "VarianceEstimate":
        """
        Wraps a raw estimate, truncating negatives at zero.

        Args:
            raw_value (float): Untruncated estimate.
            method (str): Estimator tag.
            bandwidth (float): Bandwidth used (m, L or a squared distance).
            **extra: Optional df, ci or fit.

        Returns:
            VarianceEstimate: The wrapped estimate.
        """
        raw = float(raw_value)
        return cls(
            value=max(raw, 0.0),
            raw_value=raw,
            method=method,
            bandwidth=bandwidth,
            truncated=raw < 0,
            **extra,
        )

    def to_dict(self) -> Dict[str, Any]:
        """Plain-dict view for JSON output."""
        out = asdict(self)
        if self.fit is not None:
            out["fit"]["method"] = self.fit.method.value
        return out


@dataclass(frozen=True)
class ExactMoments:
    """Exact bias, variance and MSE of a normalized quadratic form."""

    bias: float
    variance: float
    mse: float

    @classmethod
    def from_parts(cls, bias: float, variance: float) -> "ExactMoments":
        """Builds the record with mse = bias^2 + variance."""
        return cls(bias=bias, variance=variance, mse=bias * bias + variance)
