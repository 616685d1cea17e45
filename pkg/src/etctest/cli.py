"""Command-line interface.

Exit codes: 0 ok, 2 input error, 3 degenerate operating condition,
4 internal consistency failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DegenerateOperatingCondition, ETCError, PartitionSumMismatch
from .estimator import (
    LabeledSample,
    OperatingCondition,
    etc_hat_conservative,
    format_rational,
    validate_oc,
)
from .filter import load_matrix, rank_variables, write_report
from .nulldist import CountingCache, NDCache, null_distribution, p_value, save_nd, write_nd_csv
from .simbench import STUDIES, StudyConfig, run_study, write_grid_csv

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_INTERNAL = 0, 2, 3, 4

log = logging.getLogger("etctest")


class UsageError(Exception):
    pass


def _dec(q: Fraction) -> str:
    return f"{float(q):.17g}"


def _oc(args) -> OperatingCondition:
    try:
        oc = OperatingCondition(args.c0, args.c1, args.pi1)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot parse operating condition: {exc}") from None
    return validate_oc(oc)


def _emit(record: dict) -> None:
    sys.stdout.write(json.dumps(record) + "\n")


def _read_single(data_path, labels, column):
    """Values and labels for ``test``; ``labels`` is a column name or a file."""
    with open(data_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{data_path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    label_file = Path(labels)
    if label_file.is_file():
        with open(label_file, newline="", encoding="utf-8") as fh:
            lab_rows = [r for r in csv.reader(fh) if r]
        if lab_rows and not lab_rows[0][-1].strip().lstrip("-").isdigit():
            lab_rows = lab_rows[1:]
        y = [r[-1].strip() for r in lab_rows]
        value_col = header.index(column) if column else 0
    else:
        if labels not in header:
            raise UsageError(f"label column {labels!r} not found in {data_path}")
        li = header.index(labels)
        y = [r[li].strip() for r in body]
        if column:
            value_col = header.index(column)
        else:
            value_col = next(i for i in range(len(header)) if i != li)
    x = []
    for r, row in enumerate(body, start=2):
        try:
            x.append(float(row[value_col]))
        except (ValueError, IndexError):
            raise UsageError(f"non-numeric value at row {r}, column {header[value_col]!r}") from None
    if len(x) != len(y):
        raise UsageError(f"{len(x)} values but {len(y)} labels")
    if any(v not in ("0", "1") for v in y):
        raise UsageError("labels must be 0 or 1")
    return np.array(x), np.array([int(v) for v in y])


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_test(args) -> int:
    if args.labels is None:
        raise UsageError("--labels is required")
    oc = _oc(args)
    x, y = _read_single(args.data, args.labels, args.column)
    sample = LabeledSample(x, y)
    est = etc_hat_conservative(sample, oc)
    validate_oc(oc, for_null=True)
    nd = NDCache(args.cache_dir).get(sample.n0, sample.n1, oc)
    p = p_value(nd, est.value)
    _emit(
        {
            "n0": sample.n0,
            "n1": sample.n1,
            "statistic_exact": format_rational(est.value),
            "statistic": _dec(est.value),
            "direction": est.direction.value,
            "threshold": est.threshold,
            "threshold_index": est.rule.threshold_index,
            "fn": est.fn,
            "fp": est.fp,
            "tie_adjusted": est.tie_adjusted,
            "p_exact": format_rational(p),
            "p": _dec(p),
        }
    )
    return EXIT_OK


def cmd_nulldist(args) -> int:
    oc = validate_oc(_oc(args), for_null=True)
    if args.n0 is None or args.n1 is None:
        raise UsageError("--n0 and --n1 are required")
    if args.n0 < 1 or args.n1 < 1:
        raise UsageError("--n0 and --n1 must be >= 1")
    cache = NDCache(args.cache_dir)
    nd = cache.get(args.n0, args.n1, oc)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_nd_csv(nd, out)
    if cache.directory is None:
        save_nd(nd, out.with_name(out.name + ".nd"))
    _emit(
        {
            "n0": nd.n0,
            "n1": nd.n1,
            "support_size": len(nd.support),
            "total": str(nd.total),
            "p_at_zero": format_rational(p_value(nd, 0)),
            "out": str(out),
        }
    )
    return EXIT_OK


def cmd_filter(args) -> int:
    oc = _oc(args)
    validate_oc(oc, for_null=True)
    if args.input_format == "csv-long":
        if args.labels is None:
            raise UsageError("csv-long input needs --labels pointing to a label file")
        m = load_matrix(args.data, "csv-long", label_path=args.labels)
    else:
        m = load_matrix(args.data, "csv-wide", label_column=args.labels or "label")
    report = rank_variables(m, oc, NDCache(args.cache_dir), adjust=args.adjust)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_report(report, out, format=args.format, top=args.top)
    ps = [r.p for r in report.records]
    qs = [r.p_adjusted for r in report.records]
    _emit(
        {
            "variables_tested": len(report.records),
            "variables_rejected": len(report.rejected),
            "p_le_0.05": sum(p <= Fraction(1, 20) for p in ps),
            "p_bh_le_0.05": sum(q <= Fraction(1, 20) for q in qs) if args.adjust == "bh" else None,
            "out": str(out),
        }
    )
    return EXIT_OK


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"cannot parse list {text!r}") from None


def cmd_simulate(args) -> int:
    overrides = {"seed": args.seed, "oc": validate_oc(_oc(args), for_null=True)}
    for name in ("replications", "n0", "n1"):
        if getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if args.signal is not None:
        overrides["signal_count"] = args.signal
    if args.noise is not None:
        overrides["noise_count"] = args.noise
    if args.deltas:
        overrides["delta_grid"] = _floats(args.deltas)
    if args.second_grid:
        key = "phi_grid" if args.study == "C" else "sigma_grid"
        overrides[key] = _floats(args.second_grid)
    make = StudyConfig.full if args.scale == "full" else StudyConfig.desk
    try:
        cfg = make(args.study, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    grid = run_study(cfg, workers=args.workers)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"study_{args.study}.csv"
    write_grid_csv(grid, path)
    _emit({"study": args.study, "grid_points": len(list(cfg.grid_points())), "out": str(path)})
    return EXIT_OK


def cmd_bench(args) -> int:
    oc = validate_oc(_oc(args), for_null=True)
    if args.n_min < 1 or args.n_max < args.n_min:
        raise UsageError("need 1 <= --n-min <= --n-max")
    modes = {"on": [True], "off": [False], None: [True, False]}[args.memo]
    rows = []
    for n in range(args.n_min, args.n_max + 1):
        for memo in modes:
            cache = CountingCache() if memo else None
            start = time.perf_counter()
            null_distribution(n, n, oc, cache=cache, memo=memo)
            elapsed = time.perf_counter() - start
            rows.append({"n0": n, "n1": n, "memo": "on" if memo else "off", "seconds": f"{elapsed:.6f}"})
            log.info("n0=n1=%d memo=%s %.4fs", n, memo, elapsed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["n0", "n1", "memo", "seconds"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    _emit({"rows": len(rows), "out": str(out)})
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_oc(p):
    p.add_argument("--c0", default="1", help="cost of a false positive (decimal or num/den)")
    p.add_argument("--c1", default="1", help="cost of a false negative")
    p.add_argument("--pi1", default="1/2", help="prevalence of the positive class")


def _add_cache(p):
    p.add_argument("--cache-dir", default=None, help="null-distribution cache (default: $ETC_CACHE_DIR)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="etctest", description="Exact threshold-separability test.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="test one variable")
    p.add_argument("--data", required=True, help="CSV with a header row")
    p.add_argument("--labels", help="label column in --data, or a file of 0/1 labels")
    p.add_argument("--column", help="value column (default: first non-label column)")
    _add_oc(p)
    _add_cache(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("nulldist", help="write the exact null distribution")
    p.add_argument("--n0", type=int)
    p.add_argument("--n1", type=int)
    p.add_argument("--out", required=True)
    _add_oc(p)
    _add_cache(p)
    p.set_defaults(func=cmd_nulldist)

    p = sub.add_parser("filter", help="test and rank every variable of a matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", help="label column (csv-wide, default 'label') or label file (csv-long)")
    p.add_argument("--input-format", choices=["csv-wide", "csv-long"], default="csv-wide")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--top", type=int, default=None)
    p.add_argument("--adjust", choices=["none", "bh"], default="bh")
    _add_oc(p)
    _add_cache(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("simulate", help="run a simulation study")
    p.add_argument("--study", choices=STUDIES, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scale", choices=["desk", "full"], default="desk")
    p.add_argument("--replications", type=int)
    p.add_argument("--signal", type=int)
    p.add_argument("--noise", type=int)
    p.add_argument("--n0", type=int)
    p.add_argument("--n1", type=int)
    p.add_argument("--deltas", help="comma-separated location shifts")
    p.add_argument("--second-grid", help="comma-separated sigma1 (B), phi (C) or sigma (D) values")
    p.add_argument("--workers", type=int, default=1)
    _add_oc(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="time null-distribution construction")
    p.add_argument("--n-min", type=int, default=6)
    p.add_argument("--n-max", type=int, default=12)
    p.add_argument("--memo", choices=["on", "off"], default=None, help="default: both")
    p.add_argument("--out", required=True)
    _add_oc(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateOperatingCondition as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except PartitionSumMismatch as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ETCError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
