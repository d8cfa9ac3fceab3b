"""
Input/Output Utilities for Datasets and Reports.

This module loads regression datasets from CSV files and writes simulation
reports, histograms and matrix dumps.

Functions:
    - load_dataset: Reads covariate and response columns from a CSV file.
    - write_reports_json / read_reports_json: SimReport round trip.
    - write_frame_csv: Any table, floats with 17 significant digits.
    - write_histogram_csv / write_estimates_csv: Histogram exports.
    - write_matrix_csv: Nonzero entries (i, j, value) of a banded matrix.

Usage:
    >>> from varfit.utils.io import load_dataset
    >>> data = load_dataset("lakes.csv", response="ph", covariates=["t1"])
"""

import json
import os
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence

import numpy as np
import pandas as pd

from varfit.exceptions import DataError
from varfit.structures.banded import BandedSymmetric
from varfit.structures.records import Sample1D
from varfit.utils.simulator import Histogram, SimReport

FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True, eq=False)
class DatasetFile:
    """
    A parsed regression dataset.

    Attributes:
        path (str): Source file.
        covariates (List[str]): Covariate column names.
        response (str): Response column name.
        points (np.ndarray): Covariates, shape (n, p).
        y (np.ndarray): Responses, shape (n,).
        order (np.ndarray): File row of each stored row (identity unless sorted).
    """

    path: str
    covariates: List[str]
    response: str
    points: np.ndarray
    y: np.ndarray
    order: np.ndarray

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def to_sample(self) -> Sample1D:
        """
        One-dimensional view, sorted by the covariate.

        Raises:
            DataError: If there is more than one covariate.
        """
        if self.dimension != 1:
            raise DataError(f"A 1-D sample needs exactly one covariate, got {self.dimension}")
        return Sample1D(self.points[:, 0], self.y)


def load_dataset(
    path: str,
    response: str,
    covariates: Optional[Sequence[str]] = None,
    sort: bool = True,
) -> DatasetFile:
    """
    Reads a comma-separated file with a header row.

    Single-covariate datasets are sorted by the covariate (stable), with the
    original row order kept in ``order``.

    Args:
        path (str): CSV file (UTF-8, '.' decimal point).
        response (str): Response column.
        covariates (Optional[Sequence[str]]): Covariate columns; every other
            column when omitted.
        sort (bool): Sort 1-D data by the covariate.

    Returns:
        DatasetFile: The parsed dataset.

    Raises:
        FileNotFoundError: If the file does not exist.
        DataError: If the file cannot be parsed, columns are missing or
            non-numeric, values are not finite, or fewer than 3 rows remain.
    """
    _validate_path(path)
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"Cannot parse {path}: {exc}") from exc

    if response not in frame.columns:
        raise DataError(f"Response column {response!r} not found in {path}")
    names = list(covariates) if covariates else [c for c in frame.columns if c != response]
    missing = [c for c in names if c not in frame.columns]
    if missing:
        raise DataError(f"Covariate column(s) {missing} not found in {path}")
    if not names:
        raise DataError(f"{path} has no covariate columns")

    try:
        values = frame[names + [response]].apply(pd.to_numeric, errors="raise").to_numpy(float)
    except (ValueError, TypeError) as exc:
        raise DataError(f"Non-numeric values in {path}: {exc}") from exc
    if len(values) < 3:
        raise DataError(f"{path} has {len(values)} rows; at least 3 are required")
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path} contains missing or non-finite values")

    order = np.arange(len(values))
    if sort and len(names) == 1:
        order = np.argsort(values[:, 0], kind="stable")
        values = values[order]
    return DatasetFile(
        path=path,
        covariates=names,
        response=response,
        points=values[:, :-1],
        y=values[:, -1],
        order=order,
    )


def write_reports_json(reports: Sequence[SimReport], path: str, extra: Optional[dict] = None) -> None:
    """Writes reports (and optional extra fields) as JSON; floats keep full precision."""
    payload: dict = {"reports": [r.to_dict() for r in reports]}
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)


def read_reports_json(path: str) -> List[SimReport]:
    """Reads reports written by write_reports_json."""
    _validate_path(path)
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    return [SimReport.from_dict(d) for d in payload["reports"]]


def write_frame_csv(frame: pd.DataFrame, path: str) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def write_histogram_csv(hist: Histogram, path: str) -> None:
    """Columns bin_lo, bin_hi, count."""
    write_frame_csv(hist.to_frame(), path)


def write_estimates_csv(estimates: Sequence[float], path: str) -> None:
    """One raw estimate per row, in replicate order."""
    frame = pd.DataFrame(
        {"replicate": np.arange(len(estimates)), "estimate": np.asarray(estimates, dtype=float)}
    )
    write_frame_csv(frame, path)


def write_matrix_csv(A: BandedSymmetric, path: str) -> None:
    """Nonzero entries as 1-based (i, j, value) triples."""
    frame = pd.DataFrame(list(A.nonzero_entries()), columns=["i", "j", "value"])
    write_frame_csv(frame, path)


def dumps(payload: Any) -> str:
    """JSON text with round-trip float precision."""
    return json.dumps(payload, indent=2)


def _validate_path(path: str) -> None:
    """Helper to validate file existence."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"File not found: {path}")
