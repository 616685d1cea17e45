"""Filter-type variable selection: test every column, rank, adjust, report.

All variables measured on the same samples share ``n0``, ``n1`` and the
operating condition, so a single null distribution serves the whole
matrix.
"""

from __future__ import annotations

import bisect
import csv
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    LabelMismatch,
    NdMismatch,
    ParseError,
    SingleClassLabels,
    ValueOutOfRange,
)
from .estimator import (
    OperatingCondition,
    as_rational,
    etc_columns,
    format_rational,
)
from .nulldist import NDCache, NullDistribution, cache_key

log = logging.getLogger(__name__)

MISSING = {"", "na", "nan", "null"}


@dataclass(frozen=True, eq=False)
class VariableMatrix:
    names: list
    data: np.ndarray  # shape (n, m), one column per variable
    labels: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        labels = np.asarray(self.labels).astype(np.int8).ravel()
        names = list(self.names)
        if data.shape[1] != len(names):
            raise ValueError(f"{len(names)} names for {data.shape[1]} columns")
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")
        if data.shape[0] != labels.size:
            raise LabelMismatch(f"{labels.size} labels for {data.shape[0]} samples")
        if not np.isin(labels, (0, 1)).all():
            raise LabelMismatch("labels must be 0 or 1")
        if labels.min() == labels.max():
            raise SingleClassLabels("labels contain a single class")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "names", names)

    @property
    def n1(self) -> int:
        return int(self.labels.sum())

    @property
    def n0(self) -> int:
        return int(self.labels.size) - self.n1


def _parse_float(text, row, col):
    if text.strip().lower() in MISSING:
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r} at row {row}, column {col!r}", row, col) from None


def _parse_label(text, row, col):
    if text.strip() not in ("0", "1"):
        raise ParseError(f"label must be 0 or 1, got {text!r} at row {row}, column {col!r}", row, col)
    return int(text)


def load_matrix(path, format: str = "csv-wide", label_column: str = "label", label_path=None) -> VariableMatrix:
    """Read a variable matrix.

    ``csv-wide`` has one row per sample, a 0/1 ``label_column`` and one
    numeric column per variable.  ``csv-long`` has columns ``variable,
    sample_id, value`` and takes labels from ``label_path`` (columns
    ``sample_id, label``).  Rows are numbered as file lines, header = 1.
    """
    if format == "csv-wide":
        return _load_wide(path, label_column)
    if format == "csv-long":
        if label_path is None:
            raise ValueError("csv-long needs label_path")
        return _load_long(path, label_path)
    raise ValueError(f"unknown format {format!r}")


def _load_wide(path, label_column):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty file", 1, None)
        header = [h.strip() for h in header]
        if label_column not in header:
            raise LabelMismatch(f"label column {label_column!r} not in header")
        li = header.index(label_column)
        var_idx = [i for i in range(len(header)) if i != li]
        rows, labels = [], []
        for r, line in enumerate(reader, start=2):
            if not line:
                continue
            if len(line) != len(header):
                raise ParseError(f"row {r} has {len(line)} fields, expected {len(header)}", r, None)
            labels.append(_parse_label(line[li], r, label_column))
            rows.append([_parse_float(line[i], r, header[i]) for i in var_idx])
    if len(set(labels)) < 2:
        raise SingleClassLabels("labels contain a single class")
    data = np.array(rows, dtype=float).reshape(len(rows), len(var_idx))
    return VariableMatrix([header[i] for i in var_idx], data, labels)


def _load_long(path, label_path):
    sample_ids, labels = [], []
    with open(label_path, newline="", encoding="utf-8") as fh:
        for r, rec in enumerate(csv.DictReader(fh), start=2):
            sample_ids.append(rec["sample_id"].strip())
            labels.append(_parse_label(rec["label"], r, "label"))
    if len(set(labels)) < 2:
        raise SingleClassLabels("labels contain a single class")
    pos = {s: i for i, s in enumerate(sample_ids)}
    columns = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for r, rec in enumerate(csv.DictReader(fh), start=2):
            sid = rec["sample_id"].strip()
            if sid not in pos:
                raise LabelMismatch(f"sample {sid!r} at row {r} has no label")
            col = columns.setdefault(rec["variable"].strip(), np.full(len(sample_ids), np.nan))
            col[pos[sid]] = _parse_float(rec["value"], r, "value")
    names = list(columns)
    data = np.column_stack([columns[k] for k in names]) if names else np.empty((len(labels), 0))
    return VariableMatrix(names, data, labels)


# ---------------------------------------------------------------------------
# Ranking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FilterRecord:
    rank: int
    name: str
    statistic: Fraction
    fn: int
    fp: int
    direction: str
    tie_adjusted: bool
    threshold: float
    p: Fraction
    p_adjusted: Fraction


@dataclass
class FilterReport:
    records: list
    n0: int
    n1: int
    oc: OperatingCondition
    nd_key: str
    rejected: list = field(default_factory=list)  # (name, reason)
    adjust: str = "bh"

    @property
    def names(self):
        return [r.name for r in self.records]


def bh_adjust(p) -> list:
    """Benjamini-Hochberg step-up adjustment, exact on rationals."""
    p = [as_rational(v) for v in p]
    for v in p:
        if not 0 <= v <= 1:
            raise ValueOutOfRange(f"p-value {v} outside [0, 1]")
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    adjusted = [Fraction(0)] * m
    running = Fraction(1)
    for rank in range(m, 0, -1):
        i = order[rank - 1]
        running = min(running, p[i] * m / rank)
        adjusted[i] = running
    return adjusted


def cdf_counts(nd: NullDistribution, scores, denominator: int) -> list:
    """Null counts ``<= score / denominator`` for each integer score."""
    support_scores = [int(v * denominator) for v, _ in nd.support]
    cum = list(itertools.accumulate(c for _, c in nd.support))
    out = []
    for s in scores:
        j = bisect.bisect_right(support_scores, int(s))
        out.append(cum[j - 1] if j else 0)
    return out


def rank_variables(m: VariableMatrix, oc: OperatingCondition, nd, adjust: str = "bh") -> FilterReport:
    """Test every variable against one shared null distribution and rank by p.

    ``nd`` is a ``NullDistribution`` for ``(m.n0, m.n1, oc)`` or an
    ``NDCache`` to fetch it from.  Variables with missing values are
    skipped and listed in ``report.rejected``.  With ``adjust="none"`` the
    adjusted p-values equal the raw ones.
    """
    if adjust not in ("bh", "none"):
        raise ValueError(f"unknown adjustment {adjust!r}")
    if isinstance(nd, NDCache):
        nd = nd.get(m.n0, m.n1, oc)
    if not nd.matches(m.n0, m.n1, oc):
        raise NdMismatch(
            f"null distribution is for n0={nd.n0}, n1={nd.n1}, oc={nd.oc.canonical()}; "
            f"matrix needs n0={m.n0}, n1={m.n1}, oc={oc.canonical()}"
        )
    complete = ~np.isnan(m.data).any(axis=0)
    rejected = [(m.names[j], "missing values") for j in np.flatnonzero(~complete)]
    for name, why in rejected:
        log.warning("skipping variable %s: %s", name, why)
    keep = np.flatnonzero(complete)

    records = []
    if keep.size:
        cols = etc_columns(m.data[:, keep], m.labels, oc, conservative=True)
        den = cols.scale.denominator
        counts = cdf_counts(nd, cols.score, den)
        order = sorted(range(keep.size), key=lambda j: (counts[j], cols.score[j], j))
        p = [Fraction(counts[j], nd.total) for j in order]
        p_adj = bh_adjust(p) if adjust == "bh" else list(p)
        for rank, (j, pj, qj) in enumerate(zip(order, p, p_adj), start=1):
            est = cols.estimate(j)
            records.append(
                FilterRecord(
                    rank=rank,
                    name=m.names[keep[j]],
                    statistic=est.value,
                    fn=est.fn,
                    fp=est.fp,
                    direction=est.direction.value,
                    tie_adjusted=est.tie_adjusted,
                    threshold=est.threshold,
                    p=pj,
                    p_adjusted=qj,
                )
            )
    return FilterReport(records, m.n0, m.n1, oc, cache_key(m.n0, m.n1, oc), rejected, adjust)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

REPORT_COLUMNS = [
    "rank", "name", "statistic_exact", "statistic", "fn", "fp", "direction",
    "tie_adjusted", "p_exact", "p", "p_bh", "p_bh_exact",
]


def _dec(q: Fraction) -> str:
    return f"{float(q):.17g}"


def _row(r: FilterRecord, adjusted: bool = True) -> dict:
    row = {
        "rank": r.rank,
        "name": r.name,
        "statistic_exact": format_rational(r.statistic),
        "statistic": _dec(r.statistic),
        "fn": r.fn,
        "fp": r.fp,
        "direction": r.direction,
        "tie_adjusted": str(r.tie_adjusted).lower(),
        "p_exact": format_rational(r.p),
        "p": _dec(r.p),
        "p_bh": _dec(r.p_adjusted),
        "p_bh_exact": format_rational(r.p_adjusted),
    }
    if not adjusted:
        row["p_bh"] = row["p_bh_exact"] = ""
    return row


def write_report(r: FilterReport, path, format: str = "csv", top: int | None = None) -> None:
    records = r.records if top is None else r.records[:top]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if format == "csv":
            writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for rec in records:
                writer.writerow(_row(rec, r.adjust == "bh"))
        elif format == "jsonl":
            for rec in records:
                fh.write(json.dumps(_row(rec, r.adjust == "bh")) + "\n")
        else:
            raise ValueError(f"unknown report format {format!r}")


def read_report(path) -> list:
    """Rows of a CSV report as dicts, exact columns parsed to ``Fraction``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["rank"] = int(row["rank"])
        for key in ("statistic_exact", "p_exact", "p_bh_exact"):
            row[key] = Fraction(row[key]) if row[key] else None
    return rows
