"""Haar/Schauder bases, coefficient matrices and the (U, V)-covariance.

For basis functions ``phi_i`` (on x) and ``psi_j`` (on y) with positive
weights ``sigma_i`` and ``tau_j``, the processes

    U(s) = sum_i sigma_i Z_i phi_i(s),   V(t) = sum_j tau_j Z'_j psi_j(t)

with independent standard normal ``Z`` give

    Cov_{U,V}^2(X, Y) = sum_{i,j} sigma_i^2 tau_j^2 A_ij^2,
    A_ij = Cov(phi_i(X), psi_j(Y)).

With Schauder functions on both axes, U and V are Brownian motions on [0, 1]
(Levy-Ciesielski construction) and the sum is the squared Brownian covariance.
The Gaussian coefficients never need sampling; only ``A`` is estimated.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, TextIO

import numpy as np

from .data import ConstantColumnError, DataError, PairedSample, _as_2d, rescale_unit_interval


def _split_index(i: int) -> tuple[int, int]:
    """Basis index i = 2**j + k -> (j, k); index 0 has no resolution."""
    j = i.bit_length() - 1
    return j, i - (1 << j)


def _check_t(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DataError("evaluation points must lie in [0, 1]")
    return arr


def _cell_position(t: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
    # t == 1 belongs to the last dyadic cell (left-limit convention)
    u = t * (1 << j)
    cell = np.minimum(np.floor(u), (1 << j) - 1)
    return cell.astype(np.int64), u - cell


def haar(i: int, t):
    """Haar function ``H_i`` at ``t`` in [0, 1].

    ``H_0 = 1``. For ``i = 2**j + k`` the function is ``+2**(j/2)`` on the left
    half of ``[k/2**j, (k+1)/2**j)`` and ``-2**(j/2)`` on the right half. At
    ``t = 1`` the left limit is used.
    """
    if i < 0:
        raise ValueError("basis index must be >= 0")
    t_arr = _check_t(t)
    if i == 0:
        out = np.ones_like(t_arr)
    else:
        j, k = _split_index(i)
        cell, frac = _cell_position(t_arr, j)
        amp = 2.0 ** (j / 2)
        out = np.where(cell == k, np.where(frac < 0.5, amp, -amp), 0.0)
    return float(out) if out.ndim == 0 else out


def schauder(i: int, t):
    """Schauder function ``S_i(t)``, the integral of ``H_i`` from 0 to ``t``.

    ``S_0(t) = t``; otherwise a tent of height ``2**(-j/2) / 2`` over the
    support of ``H_i``.
    """
    if i < 0:
        raise ValueError("basis index must be >= 0")
    t_arr = _check_t(t)
    if i == 0:
        out = t_arr.astype(float)
    else:
        j, k = _split_index(i)
        cell, frac = _cell_position(t_arr, j)
        tent = 2.0 ** (-j / 2) * np.minimum(frac, 1.0 - frac)
        out = np.where(cell == k, tent, 0.0)
    return float(out) if out.ndim == 0 else out


def schauder_matrix(t, count: int) -> np.ndarray:
    """Evaluate ``S_0 .. S_{count-1}`` at every point; shape ``(len(t), count)``.

    ``count`` must be a power of two (a full set of resolutions).
    """
    t = _check_t(t).ravel()
    if count < 1 or count & (count - 1):
        raise ValueError("count must be a power of two")
    n = t.shape[0]
    out = np.zeros((n, count))
    out[:, 0] = t
    rows = np.arange(n)
    j = 0
    while (1 << j) < count:
        cell, frac = _cell_position(t, j)
        out[rows, (1 << j) + cell] = 2.0 ** (-j / 2) * np.minimum(frac, 1.0 - frac)
        j += 1
    return out


def schauder_support(i: int) -> tuple[float, float]:
    """Dyadic support interval of ``S_i``; index 0 maps to [0, 1]."""
    if i == 0:
        return 0.0, 1.0
    j, k = _split_index(i)
    width = 2.0 ** -j
    return k * width, (k + 1) * width


# family name -> (evaluator(t, count), support(i))
BASIS_FAMILIES: dict[str, tuple[Callable[[np.ndarray, int], np.ndarray], Callable[[int], tuple[float, float]]]] = {
    "haar_schauder": (schauder_matrix, schauder_support),
}


@dataclass(frozen=True)
class BasisSpec:
    """A truncated basis on [0, 1] with one positive weight per function.

    Level ``L`` keeps basis indices ``0 .. 2**(L+1) - 1``. ``weights`` is the
    sequence sigma (when used on x) or tau (when used on y); default all ones.
    """

    level: int = 6
    weights: tuple[float, ...] | None = None
    family: str = "haar_schauder"

    def __post_init__(self):
        if int(self.level) != self.level or self.level < 0:
            raise ValueError("level must be a nonnegative integer")
        if self.family not in BASIS_FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}")
        if self.weights is None:
            w = (1.0,) * self.count
        elif np.ndim(self.weights) == 0:
            w = (float(self.weights),) * self.count
        else:
            w = tuple(float(v) for v in self.weights)
        if len(w) != self.count:
            raise ValueError(f"expected {self.count} weights for level {self.level}, got {len(w)}")
        if not all(v > 0 and math.isfinite(v) for v in w):
            raise ValueError("weights must be finite and strictly positive")
        object.__setattr__(self, "weights", w)

    @property
    def count(self) -> int:
        return 1 << (self.level + 1)

    def evaluate(self, t) -> np.ndarray:
        return BASIS_FAMILIES[self.family][0](t, self.count)

    def support(self, i: int) -> tuple[float, float]:
        return BASIS_FAMILIES[self.family][1](i)


@dataclass(frozen=True)
class CoefficientMatrix:
    """Plug-in estimates ``a[i, j]`` of ``Cov(phi_i(X), psi_j(Y))``."""

    a: np.ndarray
    basis_x: BasisSpec
    basis_y: BasisSpec
    n: int


def centered_evaluations(spec: BasisSpec, t) -> np.ndarray:
    """Basis evaluations with column means removed; constant columns become exact zeros."""
    m = spec.evaluate(t)
    flat = np.ptp(m, axis=0) == 0
    m -= m.mean(axis=0)
    m[:, flat] = 0.0
    return m


def coefficient_matrix(s: PairedSample, bx: BasisSpec, by: BasisSpec) -> CoefficientMatrix:
    """Sample covariances (1/n normalization) of basis evaluations.

    The sample must have scalar margins already inside [0, 1]; see
    :func:`rescale_sample`.
    """
    if s.p != 1 or s.q != 1:
        raise DataError("basis expansion needs scalar x and y")
    for name, col in (("x", s.x), ("y", s.y)):
        if np.any(col < 0.0) or np.any(col > 1.0):
            raise DataError(f"{name} has values outside [0, 1]; rescale first")
    phi = centered_evaluations(bx, s.x[:, 0])
    psi = centered_evaluations(by, s.y[:, 0])
    a = phi.T @ psi / s.n
    return CoefficientMatrix(a, bx, by, s.n)


def _weighted_terms(a: CoefficientMatrix) -> np.ndarray:
    sigma = np.asarray(a.basis_x.weights)
    tau = np.asarray(a.basis_y.weights)
    if a.a.shape != (sigma.size, tau.size):
        raise ValueError(
            f"weight lengths ({sigma.size}, {tau.size}) do not match coefficient matrix {a.a.shape}"
        )
    return (sigma[:, None] ** 2) * (tau[None, :] ** 2) * a.a ** 2


def uv_cov_sq(a: CoefficientMatrix) -> float:
    """``sum_{i,j} sigma_i^2 tau_j^2 a[i, j]^2``."""
    return math.fsum(_weighted_terms(a).ravel())


def rescale_sample(s: PairedSample) -> PairedSample:
    """Map both margins onto [0, 1]. Constant margins raise ConstantColumnError."""
    return PairedSample(rescale_unit_interval(s.x), rescale_unit_interval(s.y))


def _safe_rescale(col: np.ndarray) -> np.ndarray | None:
    try:
        return rescale_unit_interval(col)
    except ConstantColumnError:
        return None


# Levy-Ciesielski with unit weights builds standard Brownian motion
# (Cov(W_s, W_t) = min(s, t)). Distance covariance corresponds to the
# two-sided process with Cov(W_s, W_t) = |s| + |t| - |s - t|, i.e. weight sqrt(2).
NORMALIZATION_WEIGHTS = {"standard": 1.0, "dcov": math.sqrt(2.0)}


def brownian_cov_truncated(s: PairedSample, level: int = 6, normalization: str = "dcov") -> float:
    """Truncated Brownian covariance through the Schauder expansion.

    Both margins are rescaled to [0, 1] first. With ``normalization="standard"``
    the result is the Frobenius norm of the truncated coefficient matrix (unit
    weights). The default ``"dcov"`` scales the process so that the limit
    ``level -> inf`` equals the distance covariance of the rescaled sample;
    it is exactly twice the standard value.

    A constant margin gives 0.
    """
    if normalization not in NORMALIZATION_WEIGHTS:
        raise ValueError(f"normalization must be one of {sorted(NORMALIZATION_WEIGHTS)}")
    if s.p != 1 or s.q != 1:
        raise DataError("basis expansion needs scalar x and y")
    x = _safe_rescale(s.x)
    y = _safe_rescale(s.y)
    if x is None or y is None:
        return 0.0
    spec = BasisSpec(level, weights=NORMALIZATION_WEIGHTS[normalization])
    return math.sqrt(uv_cov_sq(coefficient_matrix(PairedSample(x, y), spec, spec)))


@dataclass(frozen=True)
class MapCell:
    i: int
    j: int
    x_interval: tuple[float, float]
    y_interval: tuple[float, float]
    contribution: float


@dataclass(frozen=True)
class DependenceMap:
    """Per-(i, j) contributions ``sigma_i^2 tau_j^2 a[i, j]^2`` with their dyadic rectangles."""

    cells: list[MapCell]
    total: float
    shape: tuple[int, int] = field(default=(0, 0))

    def grid(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for c in self.cells:
            out[c.i, c.j] = c.contribution
        return out

    def top(self, k: int = 10) -> list[MapCell]:
        return sorted(self.cells, key=lambda c: c.contribution, reverse=True)[:k]

    def write_csv(self, out: TextIO | str | Path) -> None:
        """Columns ``i, j, x_lo, x_hi, y_lo, y_hi, contribution``; floats in repr form."""
        if isinstance(out, (str, Path)):
            with open(out, "w", newline="") as fh:
                self.write_csv(fh)
            return
        out.write("i,j,x_lo,x_hi,y_lo,y_hi,contribution\n")
        for c in self.cells:
            out.write(
                f"{c.i},{c.j},{c.x_interval[0]!r},{c.x_interval[1]!r},"
                f"{c.y_interval[0]!r},{c.y_interval[1]!r},{c.contribution!r}\n"
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def to_pgm(self) -> bytes:
        """Plain (P2) graymap: row ``i`` is the x basis index, column ``j`` the
        y basis index; values scaled so the largest contribution is 255."""
        g = self.grid()
        peak = g.max()
        levels = np.zeros(g.shape, dtype=int) if peak <= 0 else np.rint(255 * g / peak).astype(int)
        rows, cols = g.shape
        lines = ["P2", f"{cols} {rows}", "255"]
        lines += [" ".join(str(v) for v in row) for row in levels]
        return ("\n".join(lines) + "\n").encode("ascii")

    def write_pgm(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_pgm())


def dependence_map(a: CoefficientMatrix) -> DependenceMap:
    terms = _weighted_terms(a)
    cells = [
        MapCell(i, j, a.basis_x.support(i), a.basis_y.support(j), float(terms[i, j]))
        for i in range(terms.shape[0])
        for j in range(terms.shape[1])
    ]
    return DependenceMap(cells, math.fsum(terms.ravel()), terms.shape)


def read_pgm(data: bytes | str) -> np.ndarray:
    """Parse a plain P2 graymap written by :meth:`DependenceMap.to_pgm`."""
    text = data.decode("ascii") if isinstance(data, bytes) else data
    tokens = [t for line in text.splitlines() if not line.startswith("#") for t in line.split()]
    if not tokens or tokens[0] != "P2":
        raise DataError("not a plain graymap (P2)")
    cols, rows, _maxval = (int(v) for v in tokens[1:4])
    vals = np.array([int(v) for v in tokens[4:]])
    if vals.size != rows * cols:
        raise DataError("graymap pixel count does not match header")
    return vals.reshape(rows, cols)
