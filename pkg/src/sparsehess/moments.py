"""Data ingestion, centering, and the empirical moment matrices.

The solver never sees raw observations: everything downstream works from
the pair (S, Q) where S is the sample second-moment matrix of the centered
design and Q is the response-centered weighted moment
n^-1 sum_i (y_i - ybar) x_i x_i^T.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Malformed input data: bad cell, ragged row, too few rows, ..."""


@dataclass(frozen=True)
class ColumnLayout:
    """How to pick the response column out of a CSV header.

    ``response_index`` (1-based position in the header) wins over the
    ``response`` name when both are given.
    """

    response: str = "y"
    response_index: int | None = None


@dataclass(frozen=True)
class DataSet:
    """Response vector plus design matrix; rows are observations.

    ``x_means`` records the column means subtracted by :func:`center`
    (None for raw data).
    """

    y: np.ndarray
    X: np.ndarray
    names: tuple[str, ...] = ()
    x_means: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise DataError(f"X must be 2-d, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError(
                f"y has shape {y.shape}, incompatible with X {X.shape}"
            )
        if X.shape[0] < 2:
            raise DataError("need at least 2 observations")
        if X.shape[1] < 1:
            raise DataError("need at least 1 design column")
        if not np.isfinite(y).all() or not np.isfinite(X).all():
            raise DataError("non-finite entries in data")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", np.ascontiguousarray(X))
        if not self.names:
            object.__setattr__(
                self, "names", tuple(f"x{j + 1}" for j in range(X.shape[1]))
            )
        elif len(self.names) != X.shape[1]:
            raise DataError("names length does not match number of columns")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class MomentPair:
    """Sample moments S (second moment of centered X) and Q (response-weighted).

    Both are exactly symmetric by construction (averaged with their
    transpose after accumulation).
    """

    S: np.ndarray
    Q: np.ndarray
    n: int
    p: int

    def __post_init__(self):
        for name in ("S", "Q"):
            M = np.asarray(getattr(self, name), dtype=np.float64)
            if M.shape != (self.p, self.p):
                raise ValueError(f"{name} must be {self.p}x{self.p}")
            if not np.isfinite(M).all():
                raise ValueError(f"non-finite entries in {name}")
            object.__setattr__(self, name, np.ascontiguousarray(M))


def load_csv(path, layout: ColumnLayout | None = None) -> DataSet:
    """Parse a one-header-row CSV into a DataSet.

    The designated response column becomes y; every other column becomes a
    design column, in header order. Errors name the offending file line
    and column.
    """
    layout = layout or ColumnLayout()
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        import csv

        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    data_rows = rows[1:]
    if len(data_rows) < 2:
        raise DataError(
            f"{path}: insufficient rows (need >= 2 data rows, got {len(data_rows)})"
        )
    if layout.response_index is not None:
        ridx = layout.response_index - 1
        if not 0 <= ridx < len(header):
            raise DataError(
                f"{path}: response index {layout.response_index} outside "
                f"1..{len(header)}"
            )
    else:
        try:
            ridx = header.index(layout.response)
        except ValueError:
            raise DataError(
                f"{path}: response column {layout.response!r} not in header "
                f"{header}"
            ) from None
    ncol = len(header)
    values = np.empty((len(data_rows), ncol))
    for i, row in enumerate(data_rows):
        line = i + 2  # 1-based file line, header is line 1
        if len(row) != ncol:
            raise DataError(
                f"{path}: line {line}: ragged row ({len(row)} cells, "
                f"expected {ncol})"
            )
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: line {line}, column {header[j]!r}: "
                    f"non-numeric cell {cell!r}"
                ) from None
    keep = [j for j in range(ncol) if j != ridx]
    return DataSet(
        y=values[:, ridx],
        X=values[:, keep],
        names=tuple(header[j] for j in keep),
    )


def center(data: DataSet) -> DataSet:
    """Subtract each design column's sample mean; y is returned unchanged.

    Response centering happens inside Q through ybar, so y keeps its raw
    scale here.
    """
    means = data.X.mean(axis=0)
    return replace(data, X=data.X - means, x_means=means)


def standardize(data: DataSet) -> DataSet:
    """Center, then scale each column to unit sample standard deviation.

    Constant columns are left at zero rather than divided by zero. Off by
    default everywhere: the estimator and the benchmarks use raw scale.
    """
    centered = center(data)
    sd = centered.X.std(axis=0)
    sd = np.where(sd > 0.0, sd, 1.0)
    return replace(centered, X=centered.X / sd)


def raw_moments(y, X) -> MomentPair:
    """Moments of arrays taken as-is (no centering of X).

    Used by cross-validation to evaluate held-out rows about the training
    means; :func:`compute_moments` is the centering front door.
    """
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    S = X.T @ X / n
    Q = (X * (y - y.mean())[:, None]).T @ X / n
    S = (S + S.T) / 2.0
    Q = (Q + Q.T) / 2.0
    return MomentPair(S=S, Q=Q, n=n, p=p)


def compute_moments(data: DataSet) -> MomentPair:
    """Build (S, Q) from a DataSet, centering the columns first.

    Centering is idempotent to machine precision, so passing an
    already-centered DataSet gives the same moments within round-off.
    """
    return raw_moments(data.y, data.X - data.X.mean(axis=0))
