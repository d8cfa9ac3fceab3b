"""
Two-Parameter Least Squares.

This module fits the straight line s = beta0 + beta1 * d by weighted,
ordinary or generalized least squares. The fit is the closed-form solution of
the 2 x 2 normal equations, written after centering the covariate at its mean
under the chosen metric so the intercept and slope columns are orthogonal:

    d_bar = <1, d> / <1, 1>
    beta1 = <d - d_bar, s> / <d - d_bar, d - d_bar>
    beta0 = <1, s> / <1, 1> - beta1 * d_bar

where <u, v> = u^T W v is the inner product induced by the inverse error
covariance W. The centering step is what keeps the solve well conditioned when
the covariates are tiny (d_k = k^2/n^2).

All kernels reduce over the last axis, so a batch of responses of shape
(..., m) is fitted in one call.
"""

from dataclasses import dataclass
from typing import Protocol, Tuple

import numpy as np

from varfit.exceptions import PreconditionError

# Covariates whose range is within this fraction of their magnitude count as identical.
IDENTICAL_TOL = 1e-9


class Metric(Protocol):
    """Inner product <u, v> = u^T W v along the last axis."""

    def inner(self, u: np.ndarray, v: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class DiagonalMetric:
    """
    W = diag(weights). Unit weights give ordinary least squares.

    Attributes:
        weights (np.ndarray): Positive weight per observation.
    """

    weights: np.ndarray

    def inner(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.sum(self.weights * u * v, axis=-1)


@dataclass(frozen=True)
class CompoundSymmetryMetric:
    """
    W = Sigma^{-1} for Sigma = scale * {(1 - rho) I + rho 11^T} of size m.

    Sherman-Morrison gives Sigma^{-1} = c0 * (I - c1 11^T) with
    c0 = 1 / (scale (1 - rho)) and c1 = rho / (1 - rho + m rho).

    Attributes:
        scale (float): Common variance factor.
        rho (float): Common correlation, 0 <= rho < 1.
        size (int): Number of observations m.
    """

    scale: float
    rho: float
    size: int

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")

    def inner(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        c0 = 1.0 / (self.scale * (1.0 - self.rho))
        c1 = self.rho / (1.0 - self.rho + self.size * self.rho)
        u = np.broadcast_to(u, np.broadcast_shapes(np.shape(u), np.shape(v)))
        v = np.broadcast_to(v, u.shape)
        cross = np.sum(u * v, axis=-1)
        return c0 * (cross - c1 * np.sum(u, axis=-1) * np.sum(v, axis=-1))


def fit_line(
    d: np.ndarray, s: np.ndarray, metric: Metric
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solves the normal equations for s = beta0 + beta1 * d.

    Args:
        d (np.ndarray): Covariates, shape (m,).
        s (np.ndarray): Responses, shape (..., m).
        metric (Metric): Inner product of the least squares criterion.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (beta0, beta1), each of shape (...,).

    Raises:
        ValueError: If fewer than two observations are given.
        PreconditionError: If all covariates coincide (slope unidentifiable).
    """
    d = np.asarray(d, dtype=float)
    s = np.asarray(s, dtype=float)
    if d.ndim != 1 or d.shape[0] < 2:
        raise ValueError("At least two observations are needed to fit a line")
    if s.shape[-1] != d.shape[0]:
        raise ValueError("Covariate and response lengths differ")

    spread = float(np.ptp(d))
    if not spread > IDENTICAL_TOL * float(np.max(np.abs(d))):
        raise PreconditionError(
            f"All covariates are identical to within {IDENTICAL_TOL:g} (range {spread:.3g}); slope is unidentifiable"
        )

    ones = np.ones_like(d)
    g11 = metric.inner(ones, ones)
    d_bar = metric.inner(ones, d) / g11
    dc = d - d_bar
    sxx = metric.inner(dc, dc)
    if not sxx > 0:
        raise PreconditionError("All covariates are identical; slope is unidentifiable")

    beta1 = metric.inner(dc, s) / sxx
    beta0 = metric.inner(ones, s) / g11 - beta1 * d_bar
    return beta0, beta1
