"""Command-line front end.

Subcommands: dcov, uvcov, map, test, nonlin, bench. Results go to stdout (or
``--output``); diagnostics and errors go to stderr. Exit status is 0 on
success, 1 when a computation fails and 2 on flag misuse.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import basis, dcov, inference
from .data import DataError, PairedSample, load_paired_csv

log = logging.getLogger("depcov")

BENCH_SIZES = (10**2, 10**3, 10**4, 10**5)


def _columns(text: str) -> list[int | str]:
    out: list[int | str] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        out.append(int(part) if part.lstrip("-").isdigit() else part)
    if not out:
        raise argparse.ArgumentTypeError("empty column selector")
    return out


def _weights(text: str) -> str | tuple[float, ...]:
    if text == "unit":
        return text
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"weights must be 'unit' or a comma list of numbers, got {text!r}") from None


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="depcov", description="Distance and Brownian covariance tools.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def data_args(p):
        p.add_argument("--input", required=True, type=Path, help="CSV file of paired observations")
        p.add_argument("--x", required=True, type=_columns, help="x columns (indices or header names, comma separated)")
        p.add_argument("--y", required=True, type=_columns, help="y columns")
        p.add_argument("--header", action="store_true", help="first row is a header")
        p.add_argument("--output", type=Path, help="write result here instead of stdout")
        p.add_argument("--threads", type=_positive, default=None, help="worker threads (default $DEPCOV_THREADS or 1)")

    def level_args(p):
        p.add_argument("--level", type=int, default=6, help="truncation level L (2**(L+1) basis functions)")
        p.add_argument("--sigma", type=_weights, default="unit", help="x weights: 'unit' or a comma list")
        p.add_argument("--tau", type=_weights, default="unit", help="y weights: 'unit' or a comma list")

    p = sub.add_parser("dcov", help="distance covariance, variances and correlation")
    data_args(p)
    p.add_argument("--method", choices=("auto", "naive", "fast"), default="auto")

    p = sub.add_parser("uvcov", help="(U,V)-covariance and truncated Brownian covariance")
    data_args(p)
    level_args(p)

    p = sub.add_parser("map", help="multi-resolution dependence map")
    data_args(p)
    level_args(p)
    p.add_argument("--format", choices=("csv", "pgm"), default="csv")
    p.add_argument("--pgm", type=Path, help="also write a graymap to this path")

    p = sub.add_parser("test", help="permutation test of independence")
    data_args(p)
    p.add_argument("--statistic", default="dcov_sq", help="dcov_sq, brownian_truncated(L) or nonlinearity")
    p.add_argument("--level", type=int, default=None, help="level for the brownian statistic")
    p.add_argument("--B", type=_positive, default=999, help="number of permutations")
    p.add_argument("--seed", type=_seed, default=0)

    p = sub.add_parser("nonlin", help="permutation test for nonlinearity of y on x")
    data_args(p)
    p.add_argument("--B", type=_positive, default=999, help="number of permutations")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--scheme", choices=inference.NONLINEARITY_SCHEMES, default="reproject",
                   help="how replicates are formed (default: permute residuals and re-project)")
    p.add_argument("--refit", dest="scheme", action="store_const", const="refit",
                   help="shorthand for --scheme refit")

    p = sub.add_parser("bench", help="time the naive and fast dCov paths")
    p.add_argument("--max-n", type=_positive, default=10**5)
    p.add_argument("--sizes", type=lambda s: [int(v) for v in s.split(",")], help="explicit comma list of n")
    p.add_argument("--output", type=Path)
    return parser


def _spec(level: int, weights) -> basis.BasisSpec:
    return basis.BasisSpec(level, weights=None if weights == "unit" else weights)


def bench_rows(sizes) -> list[dict]:
    """Time both dCov paths on seeded uniform pairs with y = x + noise."""
    rows = []
    for n in sizes:
        rng = np.random.default_rng(0)
        x = rng.uniform(size=n)
        y = x + rng.uniform(size=n)
        t0 = time.perf_counter()
        naive = dcov.dcov_sq_naive(PairedSample(x, y))
        t1 = time.perf_counter()
        fast = dcov.dcov_sq_fast(x, y)
        t2 = time.perf_counter()
        err = max(
            abs(getattr(fast, f) - getattr(naive, f)) / abs(getattr(naive, f))
            if getattr(naive, f) else abs(getattr(fast, f))
            for f in ("dcov_sq", "dvar_x_sq", "dvar_y_sq")
        )
        naive_s, fast_s = t1 - t0, t2 - t1
        rows.append({"n": n, "naive_seconds": naive_s, "fast_seconds": fast_s,
                     "ratio": naive_s / fast_s if fast_s > 0 else math.inf, "max_rel_err": err})
        log.info("bench n=%d naive=%.4fs fast=%.4fs", n, naive_s, fast_s)
    return rows


def _bench_csv(rows) -> str:
    lines = ["n,naive_seconds,fast_seconds,ratio,max_rel_err"]
    lines += [f"{r['n']},{r['naive_seconds']!r},{r['fast_seconds']!r},{r['ratio']!r},{r['max_rel_err']!r}" for r in rows]
    return "\n".join(lines) + "\n"


def _emit(text: str | bytes, output: Path | None) -> None:
    if output is None:
        if isinstance(text, bytes):
            sys.stdout.buffer.write(text)
        else:
            sys.stdout.write(text)
        sys.stdout.flush()
    elif isinstance(text, bytes):
        output.write_bytes(text)
    else:
        output.write_text(text)


def run(args: argparse.Namespace) -> int:
    cmd = args.subcommand
    if cmd == "bench":
        sizes = args.sizes or [n for n in BENCH_SIZES if n <= args.max_n]
        _emit(_bench_csv(bench_rows(sizes)), args.output)
        return 0

    s = load_paired_csv(args.input, args.x, args.y, has_header=args.header)
    log.info("loaded %d rows (p=%d, q=%d) from %s", s.n, s.p, s.q, args.input)

    if cmd == "dcov":
        result = dcov.dcov_sq(s, method=args.method)
        _emit(json.dumps(result.to_dict()) + "\n", args.output)
    elif cmd in ("uvcov", "map"):
        rescaled = basis.rescale_sample(s)
        coeffs = basis.coefficient_matrix(rescaled, _spec(args.level, args.sigma), _spec(args.level, args.tau))
        if cmd == "uvcov":
            out = {
                "level": args.level,
                "uv_cov_sq": basis.uv_cov_sq(coeffs),
                "brownian_cov_truncated": basis.brownian_cov_truncated(s, args.level),
                "brownian_cov_truncated_standard": basis.brownian_cov_truncated(s, args.level, "standard"),
                "n": s.n,
            }
            _emit(json.dumps(out) + "\n", args.output)
        else:
            dmap = basis.dependence_map(coeffs)
            if args.pgm is not None:
                dmap.write_pgm(args.pgm)
            _emit(dmap.to_pgm() if args.format == "pgm" else dmap.to_csv(), args.output)
    elif cmd == "test":
        result = inference.permutation_test(s, args.statistic, args.B, args.seed, level=args.level, threads=args.threads)
        _emit(result.to_json() + "\n", args.output)
    elif cmd == "nonlin":
        result = inference.nonlinearity_test(s, args.B, args.seed, scheme=args.scheme, threads=args.threads)
        _emit(result.to_json() + "\n", args.output)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return run(args)
    except (DataError, ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "subcommand": args.subcommand}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
