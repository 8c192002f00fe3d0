"""Empirical distance covariance, variance and correlation.

Two routes compute the same V-statistic::

    dcov_sq = (1/n^2) * sum_{k,l} A[k,l] * B[k,l]

where ``A`` and ``B`` are the double-centered distance matrices of ``x`` and
``y``. :func:`dcov_sq_naive` forms the centered matrices explicitly (in row
blocks, so memory stays O(block * n)). :func:`dcov_sq_fast` handles scalar
pairs in O(n log n) with sorting and a bottom-up merge pass and never forms an
n x n matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import DataError, PairedSample, _as_2d

# rows of the centered matrices processed at once by the naive path
_BLOCK_ELEMENTS = 131_072

_EXT = np.longdouble


@dataclass(frozen=True)
class DcovResult:
    """Squared distance covariance and variances, and distance correlation.

    ``dcov_sq_raw`` keeps the unclamped value; ``dcov_sq`` is clamped at 0.
    """

    dcov_sq: float
    dvar_x_sq: float
    dvar_y_sq: float
    dcor: float
    n: int
    dcov_sq_raw: float

    def to_dict(self) -> dict:
        return {
            "dcov_sq": self.dcov_sq,
            "dvar_x_sq": self.dvar_x_sq,
            "dvar_y_sq": self.dvar_y_sq,
            "dcor": self.dcor,
            "n": self.n,
            "dcov_sq_raw": self.dcov_sq_raw,
        }


def _finish(dcov_raw: float, dvar_x: float, dvar_y: float, n: int) -> DcovResult:
    dcov = max(dcov_raw, 0.0)
    dvar_x = max(dvar_x, 0.0)
    dvar_y = max(dvar_y, 0.0)
    denom = dvar_x * dvar_y
    if denom > 0.0:
        dcor = min(math.sqrt(dcov) / denom ** 0.25, 1.0)
    else:
        dcor = 0.0
    return DcovResult(dcov, dvar_x, dvar_y, dcor, n, dcov_raw)


def _block_distances(m: np.ndarray, rows: slice, out: np.ndarray | None = None) -> np.ndarray:
    if m.shape[1] == 1:
        col = m[:, 0]
        out = np.subtract(col[rows, None], col[None, :], out=out)
        return np.abs(out, out=out)
    diff = m[rows, None, :] - m[None, :, :]
    return np.sqrt(np.einsum("klj,klj->kl", diff, diff), out=out)


def _row_blocks(n: int, p: int):
    step = max(1, _BLOCK_ELEMENTS // (n * max(p, 1)))
    for start in range(0, n, step):
        yield slice(start, min(start + step, n))


def _distance_row_means(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    out = np.empty(n)
    for rows in _row_blocks(n, m.shape[1]):
        out[rows] = _block_distances(m, rows).mean(axis=1)
    return out


def _centered_block(m, rows, row_means, grand, out):
    d = _block_distances(m, rows, out[: rows.stop - rows.start])
    d -= row_means[None, :]
    d -= (row_means[rows] - grand)[:, None]
    return d.ravel()


def dcov_sq_naive(s: PairedSample) -> DcovResult:
    """O(n^2) reference computation from double-centered distance matrices.

    The centered matrices are built a block of rows at a time; each block's
    inner products are accumulated with ``math.fsum``.
    """
    x, y, n = s.x, s.y, s.n
    rx = _distance_row_means(x)
    ry = _distance_row_means(y)
    gx = math.fsum(rx) / n
    gy = math.fsum(ry) / n

    blocks = list(_row_blocks(n, max(s.p, s.q)))
    rows_per_block = blocks[0].stop - blocks[0].start
    buf_a = np.empty((rows_per_block, n))
    buf_b = np.empty((rows_per_block, n))
    sxy, sxx, syy = [], [], []
    for rows in blocks:
        a = _centered_block(x, rows, rx, gx, buf_a)
        b = _centered_block(y, rows, ry, gy, buf_b)
        sxy.append(float(np.dot(a, b)))
        sxx.append(float(np.dot(a, a)))
        syy.append(float(np.dot(b, b)))

    n2 = float(n) * n
    return _finish(math.fsum(sxy) / n2, math.fsum(sxx) / n2, math.fsum(syy) / n2, n)


def dcov_from_centered(a: np.ndarray, b: np.ndarray) -> float:
    """Squared dCov V-statistic from two already double-centered matrices."""
    n = a.shape[0]
    return float(np.sum(a * b)) / (float(n) * n)


def _as_scalar_column(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise DataError(f"fast path needs a scalar column for {name}, got shape {arr.shape}; use dcov_sq_naive")
    return arr


def _row_sums_sorted(v_sorted: np.ndarray) -> np.ndarray:
    """sum_l |v_k - v_l| for each k of an ascending array, in extended precision."""
    n = v_sorted.shape[0]
    prefix = np.concatenate(([_EXT(0)], np.cumsum(v_sorted, dtype=_EXT)))
    total = prefix[-1]
    r = np.arange(n, dtype=_EXT)
    left = r * v_sorted - prefix[:-1]
    right = (total - prefix[1:]) - (n - 1 - r) * v_sorted
    return left + right


def _discordant_sum(x: np.ndarray, y: np.ndarray) -> _EXT:
    """sum over pairs l<k (x ascending) with y_l > y_k of (x_k-x_l)(y_l-y_k).

    ``x`` must already be sorted ascending. Each pair is counted at the one
    level of a bottom-up merge where l sits in the left run and k in the right.
    """
    n = x.shape[0]
    yrank = np.unique(y, return_inverse=True)[1].astype(np.int64)
    desc = (n - 1) - yrank
    pos = np.arange(n, dtype=np.int64)
    xe = x.astype(_EXT)
    ye = y.astype(_EXT)
    quantities = np.stack([np.ones(n, dtype=_EXT), xe, ye, xe * ye])

    total = _EXT(0)
    width = 1
    while width < n:
        run = pos // (2 * width)
        is_left = (pos // width) % 2 == 0
        # y descending within each run pair; on equal y the right element
        # comes first so equal-y left elements are not counted
        key = (run * n + desc) * 2 + is_left
        order = np.argsort(key, kind="stable")

        run_sorted = run[order]
        left_sorted = is_left[order]
        masked = quantities[:, order] * left_sorted
        csum = np.cumsum(masked, axis=1)

        starts = np.flatnonzero(np.r_[True, run_sorted[1:] != run_sorted[:-1]])
        before = np.zeros((4, starts.size), dtype=_EXT)
        nonzero = starts > 0
        before[:, nonzero] = csum[:, starts[nonzero] - 1]
        seg = np.cumsum(np.r_[True, run_sorted[1:] != run_sorted[:-1]]) - 1
        pre = csum - before[:, seg]

        right = ~left_sorted
        cnt, sx, sy, sxy = pre[:, right]
        xk = xe[order][right]
        yk = ye[order][right]
        total += np.sum(xk * sy - xk * yk * cnt - sxy + yk * sx)
        width *= 2
    return total


def dcov_sq_fast(x, y) -> DcovResult:
    """O(n log n) distance covariance for two scalar samples.

    Same contract as :func:`dcov_sq_naive`. Multivariate input is rejected.
    """
    x = _as_scalar_column(x, "x")
    y = _as_scalar_column(y, "y")
    n = x.shape[0]
    if y.shape[0] != n:
        raise DataError(f"x has {n} rows but y has {y.shape[0]}")
    if n < 2:
        raise DataError("fewer than 2 rows")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("non-finite values in input")

    # distances are translation invariant; centering shrinks the cross terms
    x = x - math.fsum(x) / n
    y = y - math.fsum(y) / n

    ox = np.argsort(x, kind="stable")
    xs, ys = x[ox], y[ox]
    oy = np.argsort(y, kind="stable")

    ax = np.empty(n, dtype=_EXT)
    ax[ox] = _row_sums_sorted(xs)
    bx = np.empty(n, dtype=_EXT)
    bx[oy] = _row_sums_sorted(y[oy])
    a_tot = np.sum(ax)
    b_tot = np.sum(bx)

    xe = x.astype(_EXT)
    ye = y.astype(_EXT)
    ne = _EXT(n)
    # sum_{k,l} |x_k-x_l| |y_k-y_l|
    concordant_part = ne * np.sum(xe * ye) - np.sum(xe) * np.sum(ye)
    s_xy = 2 * (concordant_part + 2 * _discordant_sum(xs, ys))
    # sum_{k,l} (x_k-x_l)^2
    s_xx = 2 * (ne * np.sum(xe * xe) - np.sum(xe) ** 2)
    s_yy = 2 * (ne * np.sum(ye * ye) - np.sum(ye) ** 2)

    def v_stat(s_pair, r1, r2, t1, t2):
        return s_pair / ne**2 - 2 * np.sum(r1 * r2) / ne**3 + t1 * t2 / ne**4

    dcov = float(v_stat(s_xy, ax, bx, a_tot, b_tot))
    dvx = float(v_stat(s_xx, ax, ax, a_tot, a_tot))
    dvy = float(v_stat(s_yy, bx, bx, b_tot, b_tot))
    return _finish(dcov, dvx, dvy, n)


def dcov_sq(s: PairedSample, method: str = "auto") -> DcovResult:
    """Distance covariance of a paired sample.

    ``method`` is ``"naive"``, ``"fast"`` or ``"auto"``; auto picks the fast
    path for scalar pairs with more than 256 rows.
    """
    if method == "auto":
        method = "fast" if s.p == 1 and s.q == 1 and s.n > 256 else "naive"
    if method == "fast":
        return dcov_sq_fast(s.x, s.y)
    if method == "naive":
        return dcov_sq_naive(s)
    raise ValueError(f"unknown method {method!r}")


def residual_projection(x, y) -> np.ndarray:
    """Residuals of ``y`` after least-squares regression on ``[1 | x]``.

    Raises
    ------
    DataError
        If the intercept-augmented design is rank deficient or ``n <= p + 1``.
    """
    x = _as_2d(x)
    y = np.asarray(y, dtype=float)
    if y.ndim == 2 and y.shape[1] == 1:
        y = y[:, 0]
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise DataError("y must be a vector with one entry per row of x")
    n, p = x.shape
    if n <= p + 1:
        raise DataError(f"need more than {p + 1} rows for a design with {p} columns plus intercept")

    design = np.column_stack([np.ones(n), x])
    q, r = np.linalg.qr(design)
    diag = np.abs(np.diag(r))
    scale = np.linalg.norm(design, axis=0)
    if np.any(diag <= 1e-10 * n * scale):
        raise DataError("rank-deficient design: collinear or constant columns in x")
    resid = y - q @ (q.T @ y)
    # y inside the column span up to rounding: report exact zeros
    if np.linalg.norm(resid) <= 8 * n * np.finfo(float).eps * np.linalg.norm(y):
        resid = np.zeros_like(resid)
    return resid


def nonlinearity_statistic(s: PairedSample, method: str = "auto") -> float:
    """dCov^2 between ``x`` and the residuals of a linear fit of ``y`` on ``x``."""
    if s.q != 1:
        raise DataError("nonlinearity statistic needs a scalar y")
    resid = residual_projection(s.x, s.y[:, 0])
    return dcov_sq(PairedSample(s.x, resid), method=method).dcov_sq
