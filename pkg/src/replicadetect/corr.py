"""Sample covariance / correlation estimation and the deviation rate.

The correlation matrix is the single input of every downstream step: all
pairwise scores, group discovery and loadings are functions of it.  The
deviation rate ``c * sqrt(log(max(p, n)) / n)`` is the natural unit in
which every threshold of the pipeline is expressed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InvalidArgument,
    NonFinite,
    ZeroVarianceColumn,
)

# Relative cutoff under which a sample variance counts as zero.
VAR_RTOL = 1e-12


@dataclass(frozen=True)
class DataMatrix:
    """An n x p data matrix, rows = observations, columns = features."""

    values: np.ndarray
    column_names: Optional[Sequence[str]] = None

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def validate(self) -> None:
        x = self.values
        if x.ndim != 2:
            raise InvalidArgument(f"expected a 2-d array, got ndim={x.ndim}")
        n, p = x.shape
        if n < 2 or p < 2:
            raise InvalidArgument(f"need n >= 2 and p >= 2, got n={n}, p={p}")
        if not np.all(np.isfinite(x)):
            raise NonFinite("data matrix contains NaN or infinite entries")
        if self.column_names is not None and len(self.column_names) != p:
            raise InvalidArgument(
                f"{len(self.column_names)} column names for p={p} columns"
            )

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "names": list(self.column_names) if self.column_names else None,
            "values": [float(v) for v in self.values.ravel(order="C")],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DataMatrix":
        n, p = int(obj["n"]), int(obj["p"])
        values = np.asarray(obj["values"], dtype=float).reshape(n, p)
        return cls(values=values, column_names=obj.get("names"))


@dataclass(frozen=True)
class CorrelationModel:
    """Sample covariance, its diagonal and the sample correlation matrix."""

    sigma_hat: np.ndarray
    diag: np.ndarray
    r_hat: np.ndarray

    @property
    def p(self) -> int:
        return self.r_hat.shape[0]

    @classmethod
    def from_covariance(cls, sigma: np.ndarray) -> "CorrelationModel":
        """Build the model from a given (population) covariance matrix."""
        sigma = np.asarray(sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise InvalidArgument("covariance must be a square matrix")
        if not np.all(np.isfinite(sigma)):
            raise NonFinite("covariance contains NaN or infinite entries")
        sigma = 0.5 * (sigma + sigma.T)
        d = np.diag(sigma).copy()
        _check_variances(d)
        inv_sd = 1.0 / np.sqrt(d)
        r = sigma * np.outer(inv_sd, inv_sd)
        np.fill_diagonal(r, 1.0)
        return cls(sigma_hat=sigma, diag=d, r_hat=r)


@dataclass(frozen=True)
class DeviationRate:
    """delta = c * sqrt(log(max(p, n)) / n)."""

    c: float
    n: float
    p: int
    value: float


def _check_variances(d: np.ndarray) -> None:
    cutoff = VAR_RTOL * float(np.max(d)) if d.size else 0.0
    bad = np.flatnonzero(d <= cutoff)
    if bad.size:
        raise ZeroVarianceColumn(int(bad[0]))


def sample_correlation(x, center: bool = True) -> CorrelationModel:
    """Compute Sigma_hat = X'X / n (after optional column centering) and
    the correlation matrix R_hat with unit diagonal.

    Columns are centered by their sample means by default; the divisor is
    n, not n - 1.  Columns with zero variance raise ZeroVarianceColumn.
    """
    if isinstance(x, DataMatrix):
        dm = x
    else:
        dm = DataMatrix(values=np.asarray(x, dtype=float))
    dm.validate()
    values = np.asarray(dm.values, dtype=float)
    n = values.shape[0]
    if center:
        values = values - values.mean(axis=0, keepdims=True)
    sigma = values.T @ values / n
    sigma = 0.5 * (sigma + sigma.T)
    d = np.diag(sigma).copy()
    _check_variances(d)
    inv_sd = 1.0 / np.sqrt(d)
    r = sigma * np.outer(inv_sd, inv_sd)
    np.fill_diagonal(r, 1.0)
    return CorrelationModel(sigma_hat=sigma, diag=d, r_hat=r)


def delta_n(c: float, n: float, p: int) -> DeviationRate:
    """Deviation rate c * sqrt(log(max(p, n)) / n) of the sample correlation."""
    if not (c > 0):
        raise InvalidArgument(f"leading constant must be positive, got {c}")
    if not (n >= 2):
        raise InvalidArgument(f"need n >= 2, got {n}")
    if not (p >= 1):
        raise InvalidArgument(f"need p >= 1, got {p}")
    value = c * np.sqrt(np.log(max(p, n)) / n)
    return DeviationRate(c=float(c), n=n, p=int(p), value=float(value))


def _looks_numeric(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_csv(path) -> DataMatrix:
    """Read a CSV file: one observation per row, optional header row.

    The first row is treated as a header whenever any of its fields fails
    to parse as a number.  Decimal points only (locale independent).
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if any(f.strip() for f in row)]
    if not rows:
        raise NonFinite("empty input file")
    names = None
    if not all(_looks_numeric(f) for f in rows[0]):
        names = [f.strip() for f in rows[0]]
        rows = rows[1:]
    if not rows:
        raise NonFinite("input file has a header but no data rows")
    try:
        values = np.array([[float(f) for f in row] for row in rows], dtype=float)
    except ValueError as exc:
        raise NonFinite(f"non-numeric data field: {exc}") from exc
    dm = DataMatrix(values=values, column_names=names)
    dm.validate()
    return dm


def save_json(dm: DataMatrix, path) -> None:
    with open(path, "w") as fh:
        json.dump(dm.to_json_dict(), fh)


def load_json(path) -> DataMatrix:
    with open(path) as fh:
        return DataMatrix.from_json_dict(json.load(fh))
