"""Paired-sample ingestion, rescaling, pairwise distances and double centering."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

ColumnSelector = Sequence[Union[int, str]]


class DataError(ValueError):
    """Raised when input data cannot be turned into a valid sample."""


class ConstantColumnError(DataError):
    """Raised when a column has no spread (max == min)."""

    def __init__(self, column: int):
        super().__init__(f"constant column {column}: cannot rescale a degenerate margin")
        self.column = column


def _as_2d(m) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DataError(f"expected a vector or matrix, got array of shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class PairedSample:
    """Aligned observations of two random vectors.

    ``x`` has shape ``(n, p)`` and ``y`` has shape ``(n, q)``. Both are stored
    as read-only float arrays.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _as_2d(self.x).copy()
        y = _as_2d(self.y).copy()
        if x.shape[0] != y.shape[0]:
            raise DataError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        if x.shape[0] < 2:
            raise DataError("fewer than 2 rows")
        for name, arr in (("x", x), ("y", y)):
            bad = np.argwhere(~np.isfinite(arr))
            if bad.size:
                r, c = bad[0]
                raise DataError(f"non-finite value in {name} at row {r}, column {c}")
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.y.shape[1]

    def swapped(self) -> "PairedSample":
        return PairedSample(self.y, self.x)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric matrix of pairwise Euclidean distances with zero diagonal."""

    d: np.ndarray

    @property
    def n(self) -> int:
        return self.d.shape[0]


@dataclass(frozen=True)
class CenteredMatrix:
    """Double-centered distance matrix; every row and column sums to zero."""

    a: np.ndarray

    @property
    def n(self) -> int:
        return self.a.shape[0]


def _resolve_columns(selector: ColumnSelector, header: list[str] | None, width: int, what: str) -> list[int]:
    if not selector:
        raise DataError(f"{what} column selector is empty")
    out = []
    for sel in selector:
        if isinstance(sel, str) and not sel.lstrip("-").isdigit():
            if header is None or sel not in header:
                raise DataError(f"{what} column {sel!r} not found in header")
            out.append(header.index(sel))
            continue
        idx = int(sel)
        if not 0 <= idx < width:
            raise DataError(f"{what} column {idx} out of range (file has {width} columns)")
        out.append(idx)
    return out


def load_paired_csv(
    path: str | Path,
    x_cols: ColumnSelector,
    y_cols: ColumnSelector,
    has_header: bool = False,
) -> PairedSample:
    """Read a comma-separated numeric file into a :class:`PairedSample`.

    Columns may be selected by zero-based index or, when ``has_header`` is
    set, by header name. Errors name the offending row (1-based line number
    in the file) and column.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with path.open(newline="") as fh:
        rows = [(lineno, row) for lineno, row in enumerate(csv.reader(fh), start=1) if row]

    header = None
    if has_header:
        if not rows:
            raise DataError("fewer than 2 rows")
        header = [h.strip() for h in rows[0][1]]
        rows = rows[1:]
    if not rows:
        raise DataError("fewer than 2 rows")

    width = len(header) if header is not None else len(rows[0][1])
    xi = _resolve_columns(x_cols, header, width, "x")
    yi = _resolve_columns(y_cols, header, width, "y")
    if set(xi) & set(yi):
        raise DataError(f"x and y selectors overlap on columns {sorted(set(xi) & set(yi))}")

    values = np.empty((len(rows), width))
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise DataError(f"malformed row at line {lineno}: expected {width} fields, got {len(row)}")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"non-numeric cell {cell!r} at line {lineno}, column {c}") from None
            if not math.isfinite(v):
                raise DataError(f"non-finite value {cell!r} at line {lineno}, column {c}")
            values[r, c] = v

    if len(rows) < 2:
        raise DataError("fewer than 2 rows")
    return PairedSample(values[:, xi], values[:, yi])


def rescale_unit_interval(sample) -> np.ndarray:
    """Affinely map each column onto [0, 1] (min -> 0, max -> 1).

    Raises
    ------
    ConstantColumnError
        If some column has max == min.
    """
    m = _as_2d(sample)
    lo = m.min(axis=0)
    hi = m.max(axis=0)
    for c in range(m.shape[1]):
        if not hi[c] > lo[c]:
            raise ConstantColumnError(c)
    out = (m - lo) / (hi - lo)
    # pin the extremes so repeated rescaling is exactly idempotent
    np.clip(out, 0.0, 1.0, out=out)
    out[m == lo] = 0.0
    out[m == hi] = 1.0
    return out


def pairwise_distances(m) -> DistanceMatrix:
    """Euclidean distance matrix between the rows of ``m``."""
    m = _as_2d(m)
    if m.shape[0] < 2:
        raise DataError("fewer than 2 rows")
    if m.shape[1] == 1:
        col = m[:, 0]
        d = np.abs(col[:, None] - col[None, :])
    else:
        diff = m[:, None, :] - m[None, :, :]
        d = np.sqrt(np.einsum("klj,klj->kl", diff, diff))
    # |a-b| and sqrt of the same sum are symmetric already; enforce anyway
    d = np.triu(d, 1)
    d = d + d.T
    return DistanceMatrix(d)


def double_center(d: DistanceMatrix | np.ndarray) -> CenteredMatrix:
    """Subtract row and column means and add back the grand mean."""
    mat = d.d if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=float)
    row = mat.mean(axis=1)
    col = mat.mean(axis=0)
    grand = row.mean()
    a = mat - row[:, None] - col[None, :] + grand
    return CenteredMatrix(a)
