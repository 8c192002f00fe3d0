"""Permutation tests for independence and for nonlinearity.

Replicate ``b`` permutes the rows of ``y`` (or of the residuals, for the
nonlinearity test) with a Philox generator keyed by the master seed and
started at counter block ``b``, so any subset of replicates can be computed
in any order, on any thread, and give the same permutations.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .basis import NORMALIZATION_WEIGHTS, BasisSpec, _safe_rescale, centered_evaluations
from .data import DataError, PairedSample, double_center, pairwise_distances
from .dcov import dcov_from_centered, dcov_sq_fast, residual_projection

# above this many rows the dCov statistic is recomputed with the O(n log n)
# path instead of permuting a stored n x n centered matrix
_MATRIX_MAX_N = 2000

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # keep pytest from collecting this class

    statistic_name: str
    statistic: float
    p_value: float
    permutations: int
    exceed_count: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "statistic_name": self.statistic_name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "permutations": self.permutations,
            "exceed_count": self.exceed_count,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def replicate_permutation(seed: int, b: int, n: int) -> np.ndarray:
    """Permutation used by replicate ``b`` for master ``seed``."""
    bitgen = np.random.Philox(key=seed & _SEED_MASK, counter=[0, 0, 0, b])
    return np.random.Generator(bitgen).permutation(n)


def _dcov_kernel(x: np.ndarray, y: np.ndarray) -> Callable[[np.ndarray | None], float]:
    """Return stat(perm) = dCov^2(x, y[perm]) with x held fixed."""
    n = x.shape[0]
    if n > _MATRIX_MAX_N and x.shape[1] == 1 and y.shape[1] == 1:
        xc, yc = x[:, 0], y[:, 0]

        def stat(perm):
            return dcov_sq_fast(xc, yc if perm is None else yc[perm]).dcov_sq

        return stat

    a = double_center(pairwise_distances(x)).a
    b = double_center(pairwise_distances(y)).a

    def stat(perm):
        # centering commutes with permuting rows and columns together
        bp = b if perm is None else b[np.ix_(perm, perm)]
        return max(dcov_from_centered(a, bp), 0.0)

    return stat


def _brownian_kernel(x: np.ndarray, y: np.ndarray, level: int, normalization: str) -> Callable:
    if x.shape[1] != 1 or y.shape[1] != 1:
        raise DataError("basis expansion needs scalar x and y")
    xr, yr = _safe_rescale(x), _safe_rescale(y)
    if xr is None or yr is None:
        return lambda perm: 0.0
    spec = BasisSpec(level, weights=NORMALIZATION_WEIGHTS[normalization])
    phi = centered_evaluations(spec, xr[:, 0])
    psi = centered_evaluations(spec, yr[:, 0])
    w = np.asarray(spec.weights) ** 2
    weight = w[:, None] * w[None, :]
    n = x.shape[0]

    def stat(perm):
        a = phi.T @ (psi if perm is None else psi[perm]) / n
        return math.sqrt(math.fsum((weight * a * a).ravel()))

    return stat


def _parse_statistic(statistic: str) -> tuple[str, int | None]:
    if statistic in ("dcov_sq", "nonlinearity"):
        return statistic, None
    if statistic.startswith("brownian"):
        rest = statistic[len("brownian"):].strip("_()")
        rest = rest.removeprefix("truncated").strip("_()")
        rest = rest.removeprefix("L=").removeprefix("L")
        return "brownian", int(rest) if rest else 6
    raise ValueError(f"unknown statistic {statistic!r}; expected dcov_sq, brownian_truncated(L) or nonlinearity")


def _run(stat: Callable, n: int, name: str, B: int, seed: int, threads: int | None) -> TestResult:
    if B < 1:
        raise ValueError("number of permutations must be >= 1")
    threads = resolve_threads(threads)
    observed = stat(None)

    def count(bs: range) -> int:
        return sum(int(stat(replicate_permutation(seed, b, n)) >= observed) for b in bs)

    if threads == 1:
        exceed = count(range(B))
    else:
        chunks = [range(lo, min(lo + math.ceil(B / threads), B)) for lo in range(0, B, math.ceil(B / threads))]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            exceed = sum(pool.map(count, chunks))
    return TestResult(name, float(observed), (1 + exceed) / (B + 1), B, exceed, seed)


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("DEPCOV_THREADS", "1"))
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return threads


def permutation_test(
    s: PairedSample,
    statistic: str = "dcov_sq",
    B: int = 999,
    seed: int = 0,
    *,
    level: int | None = None,
    normalization: str = "dcov",
    threads: int | None = None,
) -> TestResult:
    """Permutation test of independence between ``s.x`` and ``s.y``.

    ``statistic`` is ``"dcov_sq"``, ``"brownian_truncated(L)"`` (or
    ``"brownian"`` with ``level``), or ``"nonlinearity"``. The p-value is
    ``(1 + #{replicates >= observed}) / (B + 1)``.
    """
    kind, parsed_level = _parse_statistic(statistic)
    if kind == "nonlinearity":
        return nonlinearity_test(s, B, seed, threads=threads)
    if kind == "dcov_sq":
        return _run(_dcov_kernel(s.x, s.y), s.n, "dcov_sq", B, seed, threads)
    lvl = level if level is not None else parsed_level
    stat = _brownian_kernel(s.x, s.y, lvl, normalization)
    return _run(stat, s.n, f"brownian_truncated(L={lvl})", B, seed, threads)


NONLINEARITY_SCHEMES = ("reproject", "residual", "refit")


def _design_basis(x: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(np.column_stack([np.ones(x.shape[0]), x]))
    return q


def _single_dcov(x: np.ndarray, v: np.ndarray) -> float:
    return _dcov_kernel(x, v[:, None])(None)


def nonlinearity_test(
    s: PairedSample,
    B: int = 999,
    seed: int = 0,
    *,
    scheme: str = "reproject",
    threads: int | None = None,
) -> TestResult:
    """Permutation test on dCov^2(x, residuals of the linear fit of y on x).

    Schemes for the replicates:

    ``"reproject"`` (default)
        permute the residuals, then project the permuted vector off the
        design again, so replicates are orthogonal to ``[1 | x]`` like the
        observed residuals.
    ``"residual"``
        permute the residuals against ``x`` with no projection. Conservative:
        raw permuted residuals keep a random linear component that the
        observed residuals lack.
    ``"refit"``
        permute ``y`` and redo the fit per replicate.
    """
    if s.q != 1:
        raise DataError("nonlinearity test needs a scalar y")
    if scheme not in NONLINEARITY_SCHEMES:
        raise ValueError(f"scheme must be one of {NONLINEARITY_SCHEMES}")
    resid = residual_projection(s.x, s.y[:, 0])
    name = "nonlinearity" if scheme == "reproject" else f"nonlinearity_{scheme}"

    if scheme == "residual":
        return _run(_dcov_kernel(s.x, resid[:, None]), s.n, name, B, seed, threads)

    if scheme == "reproject":
        q = _design_basis(s.x)

        def stat(perm):
            if perm is None:
                return _single_dcov(s.x, resid)
            v = resid[perm]
            return _single_dcov(s.x, v - q @ (q.T @ v))

        return _run(stat, s.n, name, B, seed, threads)

    y = s.y[:, 0]

    def stat(perm):
        r = resid if perm is None else residual_projection(s.x, y[perm])
        return _single_dcov(s.x, r)

    return _run(stat, s.n, name, B, seed, threads)
