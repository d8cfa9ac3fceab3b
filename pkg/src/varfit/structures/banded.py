"""
Banded Symmetric Matrices.

This module provides the storage used for the estimator matrices D and M.
Both matrices are symmetric, banded, and constant along each off-diagonal
except that the band may stop before the last rows. The representation keeps:

    - the full diagonal (n values),
    - one value per band offset k = 1..bandwidth,
    - per offset, the number of leading rows (its extent) on which the value
      applies: A[i, i + k] = band[k - 1] for 0 <= i < extent[k - 1].

Implementation Details:
    - Memory: O(n + bandwidth).
    - Quadratic forms, products and traces: O(n * bandwidth); a dense n x n
      array is never formed (except by ``to_dense`` for small test matrices).
    - Every kernel accepts a leading batch axis: y of shape (..., n).
"""

from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class BandedSymmetric:
    """
    A symmetric banded matrix with constant values along each off-diagonal.

    Attributes:
        diagonal (np.ndarray): The n diagonal entries.
        band (np.ndarray): Value of the k-th off-diagonal, k = 1..bandwidth.
        extents (np.ndarray): Rows (from the top) on which each off-diagonal applies.
    """

    diagonal: np.ndarray
    band: np.ndarray
    extents: np.ndarray

    def __post_init__(self):
        diag = np.array(self.diagonal, dtype=float)
        band = np.array(self.band, dtype=float).reshape(-1)
        extents = np.array(self.extents, dtype=np.int64).reshape(-1)
        if diag.ndim != 1:
            raise ValueError("diagonal must be a vector")
        if len(band) != len(extents):
            raise ValueError("band and extents must have the same length")
        n = len(diag)
        for k, e in enumerate(extents, start=1):
            if e < 0 or e > n - k:
                raise ValueError(f"extent {e} of offset {k} exceeds {n - k}")
        for arr in (diag, band, extents):
            arr.flags.writeable = False
        object.__setattr__(self, "diagonal", diag)
        object.__setattr__(self, "band", band)
        object.__setattr__(self, "extents", extents)

    @classmethod
    def identity(cls, n: int) -> "BandedSymmetric":
        """Returns the n x n identity matrix."""
        return cls(np.ones(n), np.zeros(0), np.zeros(0, dtype=np.int64))

    @property
    def n(self) -> int:
        """Returns the dimension."""
        return len(self.diagonal)

    @property
    def bandwidth(self) -> int:
        """Returns the half-band width."""
        return len(self.band)

    def entry(self, i: int, j: int) -> float:
        """
        Returns A[i, j] (0-based).

        Raises:
            IndexError: If i or j is out of range.
        """
        n = self.n
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"index ({i}, {j}) is outside a {n} x {n} matrix")
        if i == j:
            return float(self.diagonal[i])
        lo, k = min(i, j), abs(i - j)
        if k > self.bandwidth or lo >= self.extents[k - 1]:
            return 0.0
        return float(self.band[k - 1])

    def _offsets(self) -> Iterator[Tuple[int, float, int]]:
        for k in range(1, self.bandwidth + 1):
            value = self.band[k - 1]
            extent = int(self.extents[k - 1])
            if value != 0.0 and extent > 0:
                yield k, float(value), extent

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """
        Computes A @ x along the last axis.

        Args:
            x (np.ndarray): Array of shape (..., n).

        Returns:
            np.ndarray: Array of shape (..., n).
        """
        x = np.asarray(x, dtype=float)
        self._check_length(x)
        out = self.diagonal * x
        for k, value, extent in self._offsets():
            out[..., :extent] += value * x[..., k : k + extent]
            out[..., k : k + extent] += value * x[..., :extent]
        return out

    def quadratic(self, y: np.ndarray) -> np.ndarray:
        """
        Computes y^T A y along the last axis without normalization.

        Args:
            y (np.ndarray): Array of shape (..., n).

        Returns:
            np.ndarray: Array of shape (...,); a float for a single vector.
        """
        y = np.asarray(y, dtype=float)
        self._check_length(y)
        total = np.sum(self.diagonal * y * y, axis=-1)
        for k, value, extent in self._offsets():
            total = total + 2.0 * value * np.sum(
                y[..., :extent] * y[..., k : k + extent], axis=-1
            )
        return total

    def trace(self) -> float:
        """Returns tr(A)."""
        return float(np.sum(self.diagonal))

    def trace_diag_sq(self) -> float:
        """Returns tr[diag(A)^2] = sum of squared diagonal entries."""
        return float(np.sum(self.diagonal**2))

    def trace_sq(self) -> float:
        """Returns tr(A^2) = sum of all squared entries."""
        off = float(np.sum(self.band**2 * self.extents))
        return self.trace_diag_sq() + 2.0 * off

    def to_dense(self) -> np.ndarray:
        """Materializes the matrix; intended for small n only."""
        dense = np.diag(np.array(self.diagonal))
        for k, value, extent in self._offsets():
            rows = np.arange(extent)
            dense[rows, rows + k] = value
            dense[rows + k, rows] = value
        return dense

    def nonzero_entries(self) -> Iterator[Tuple[int, int, float]]:
        """
        Yields (i, j, value) for every nonzero entry, 1-based, row-major.

        Both triangles are reported.
        """
        by_row = [[] for _ in range(self.n)]
        for i, v in enumerate(self.diagonal):
            if v != 0.0:
                by_row[i].append((i, float(v)))
        for k, value, extent in self._offsets():
            for i in range(extent):
                by_row[i].append((i + k, value))
                by_row[i + k].append((i, value))
        for i, row in enumerate(by_row):
            for j, v in sorted(row):
                yield i + 1, j + 1, v

    def _check_length(self, y: np.ndarray) -> None:
        if y.shape[-1:] != (self.n,):
            raise ValueError(
                f"Vector length {y.shape[-1] if y.ndim else 0} does not match matrix size {self.n}"
            )
