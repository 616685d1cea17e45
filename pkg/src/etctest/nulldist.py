"""Exact null distribution of the ETC statistic by recursive counting.

Every label permutation falls into one cell ``(fn, fp)`` and one
orientation.  Its threshold splits it into a positive domain (``tp``
positives, ``fp`` negatives) and a negative domain (``fn`` positives,
``tn`` negatives), and whether the threshold is the chosen one can be
decided on each domain separately.  A cell count is therefore a sum over
the two orientations of a product of two domain counts.

A domain count is a nested sum over the positions of the false instances
in that domain.  Positions are numbered from the threshold outwards and
false instances from the outermost inwards (``i_1 > i_2 > ...``).  Level
``k`` has a start index (closest the ``k``-th false instance may sit to
the threshold before moving the threshold past it pays off) and a stop
index (farthest it may drift before flipping the orientation pays off).
"""

from __future__ import annotations

import csv
import enum
import functools
import hashlib
import logging
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import (
    ChecksumMismatch,
    FormatVersionMismatch,
    InvalidCell,
    PartitionSumMismatch,
)
from .estimator import (
    OperatingCondition,
    as_rational,
    cost_scale,
    format_rational,
    validate_oc,
)
from .permutation import CellIndex, Orientation

log = logging.getLogger(__name__)

FORMAT_HEADER = "#ETC-ND v1"


class Domain(str, enum.Enum):
    POSITIVE = "positive-domain"
    NEGATIVE = "negative-domain"


@functools.lru_cache(maxsize=256)
def _check_null_oc(oc: OperatingCondition) -> None:
    validate_oc(oc, for_null=True)


@dataclass(frozen=True)
class QuadrantSpec:
    domain: Domain
    orientation: Orientation
    cell: CellIndex
    n0: int
    n1: int
    oc: OperatingCondition

    def __post_init__(self):
        object.__setattr__(self, "domain", Domain(self.domain))
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        object.__setattr__(self, "cell", CellIndex(*self.cell))
        _check_null_oc(self.oc)
        fn, fp = self.cell
        if not (0 <= fn <= self.n1 and 0 <= fp <= self.n0):
            raise InvalidCell(f"cell {tuple(self.cell)} outside 0..{self.n1} x 0..{self.n0}")


@dataclass(frozen=True)
class QuadrantCount:
    spec: QuadrantSpec
    count: int


@dataclass
class CountingCache:
    """Memo table for nested sums, shareable across cells and distributions.

    Keys are ``(tail, cap)`` where ``tail`` identifies the remaining
    ``(start_k, stop_k)`` levels; two quadrants with the same tail share
    entries.
    """

    tails: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    calls: int = 0

    def tail_id(self, tail):
        return self.tails.setdefault(tail, len(self.tails))


# ---------------------------------------------------------------------------
# Level bounds
# ---------------------------------------------------------------------------


def quadrant_bounds(spec: QuadrantSpec):
    """Per-level ``(start_k, stop_k)`` pairs, or ``None`` if the domain admits nothing.

    Let ``h(d)`` be the change in weighted error when the threshold moves
    ``d`` positions into the domain (true instances crossing cost, false
    ones refund).  The threshold is the chosen one iff ``h(d)`` stays above
    zero (optimality of the index) and below ``margin`` (no gain from
    flipping the orientation) for every admissible ``d``.  Minima of
    ``h`` sit just past a false instance and maxima just before one, which
    turns the two conditions into a lower and an upper bound per level.

    Domains on the left of the threshold are strict on the lower bound:
    smaller indices win ties, so moving left must strictly hurt.  The
    positives-right orientation is strict on the upper bound because
    positives-left wins ties between orientations.  A domain on the right
    cannot be crossed entirely (the last threshold is ``x_(n)``), so there
    its outermost position is exempt from the lower bound.
    """
    scale = cost_scale(spec.oc, spec.n0, spec.n1)
    return _bounds(spec.domain is Domain.POSITIVE, spec.orientation is Orientation.LEFT,
                   spec.cell.fn, spec.cell.fp, spec.n0, spec.n1, scale.fp_weight, scale.fn_weight)


def _bounds(positive, left_orientation, fn, fp, n0, n1, fp_w, fn_w):
    tp, tn = n1 - fn, n0 - fp
    margin = (fp_w * tn + fn_w * tp) - (fp_w * fp + fn_w * fn)

    if positive:
        size, n_true, n_false, w_true, w_false = tp + fp, tp, fp, fn_w, fp_w
        on_left = left_orientation
    else:
        size, n_true, n_false, w_true, w_false = fn + tn, tn, fn, fp_w, fn_w
        on_left = not left_orientation

    strict_upper = not left_orientation

    def lower_ok(h):
        return h > 0 if on_left else h >= 0

    def upper_ok(h):
        return h < margin if strict_upper else h <= margin

    if not on_left and size == 0:
        return None
    if not upper_ok(0):
        return None
    if on_left:
        if not upper_ok(w_true * n_true - w_false * n_false):
            return None
        tail_ok = True
    else:
        # h just before the last position, relevant when that position holds a true instance
        tail_ok = upper_ok(w_true * (n_true - 1) - w_false * n_false)
        if n_false == 0 and not tail_ok:
            return None

    bounds = []
    for k in range(1, n_false + 1):
        f = n_false - k + 1  # false instances at or beyond position i_k
        top = size - (k - 1)
        l1 = next((m for m in range(n_true + 1) if lower_ok(w_true * m - w_false * f)), None)
        start = f + l1 if l1 is not None else top + 1
        if not on_left and k == 1:
            start = min(start, size) if tail_ok else size
        # l2 counted from `start`; the check is on h just before position start + l2
        l2 = -1
        while start + l2 + 1 <= top and upper_ok(
            w_true * (start + l2 + 1 - f) - w_false * (f - 1)
        ):
            l2 += 1
        if l2 < 0:
            return None
        stop = min(top, start + l2)
        if start > stop:
            return None
        bounds.append((start, stop))
    return tuple(bounds)


def _nested_sum(levels, ids, k, cap, cache):
    start, stop = levels[k]
    hi = min(stop, cap)
    if hi < start:
        return 0
    if k == len(levels) - 1:
        return hi - start + 1
    if cache is not None:
        cache.calls += 1
        key = (ids[k], hi)
        hit = cache.values.get(key)
        if hit is not None:
            return hit
    total = 0
    for p in range(start, hi + 1):
        total += _nested_sum(levels, ids, k + 1, p - 1, cache)
    if cache is not None:
        cache.values[key] = total
    return total


def _count_bounds(bounds, cache):
    if bounds is None:
        return 0
    if not bounds:
        return 1
    ids = [cache.tail_id(bounds[k:]) for k in range(len(bounds))] if cache is not None else None
    return _nested_sum(bounds, ids, 0, bounds[0][1], cache)


def count_quadrant(spec: QuadrantSpec, cache: CountingCache | None = None, memo: bool = True) -> int:
    """Number of arrangements of one domain compatible with the cell and orientation."""
    if memo and cache is None:
        cache = CountingCache()
    return _count_bounds(quadrant_bounds(spec), cache if memo else None)


def _count_orientation(cell, n0, n1, scale, left, cache):
    fn, fp = cell
    plus = _count_bounds(_bounds(True, left, fn, fp, n0, n1, scale.fp_weight, scale.fn_weight), cache)
    if plus == 0:
        return 0
    minus = _count_bounds(_bounds(False, left, fn, fp, n0, n1, scale.fp_weight, scale.fn_weight), cache)
    return plus * minus


def count_orientation(
    cell, n0: int, n1: int, oc: OperatingCondition, orientation: Orientation,
    cache: CountingCache | None = None, memo: bool = True,
) -> int:
    """Product of the positive- and negative-domain counts for one orientation."""
    spec = QuadrantSpec(Domain.POSITIVE, orientation, cell, n0, n1, oc)
    if memo and cache is None:
        cache = CountingCache()
    return _count_orientation(spec.cell, n0, n1, cost_scale(oc, n0, n1),
                              spec.orientation is Orientation.LEFT, cache if memo else None)


def count_cell(
    cell, n0: int, n1: int, oc: OperatingCondition,
    cache: CountingCache | None = None, memo: bool = True,
) -> int:
    """``|S_fn,fp|``: permutations whose chosen threshold has this cell."""
    if memo and cache is None:
        cache = CountingCache()
    return sum(
        count_orientation(cell, n0, n1, oc, orientation, cache, memo)
        for orientation in Orientation
    )


# ---------------------------------------------------------------------------
# Distribution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NullDistribution:
    n0: int
    n1: int
    oc: OperatingCondition
    cells: dict  # CellIndex -> int
    support: tuple  # ((Fraction value, int count), ...) ascending
    total: int

    @classmethod
    def from_cells(cls, n0, n1, oc, cells) -> "NullDistribution":
        grouped = defaultdict(int)
        for (fn, fp), count in cells.items():
            if count:
                grouped[oc.cost(fn, fp, n0, n1)] += count
        support = tuple(sorted(grouped.items()))
        # every cell of the grid is listed, empty ones with count 0
        full = {CellIndex(fn, fp): 0 for fn in range(n1 + 1) for fp in range(n0 + 1)}
        for c, v in cells.items():
            if CellIndex(*c) not in full:
                raise InvalidCell(f"cell {tuple(c)} outside 0..{n1} x 0..{n0}")
            full[CellIndex(*c)] = v
        cells = full
        return cls(n0, n1, oc, cells, support, math.comb(n0 + n1, n0))

    @property
    def values(self):
        return [v for v, _ in self.support]

    def probabilities(self):
        return [Fraction(c, self.total) for _, c in self.support]

    def cumulative(self):
        out, acc = [], 0
        for _, c in self.support:
            acc += c
            out.append(Fraction(acc, self.total))
        return out

    def cdf_count(self, observed) -> int:
        """Number of permutations with statistic ``<= observed``."""
        observed = as_rational(observed)
        return sum(c for v, c in self.support if v <= observed)

    def matches(self, n0: int, n1: int, oc: OperatingCondition) -> bool:
        return (self.n0, self.n1, self.oc) == (n0, n1, oc)


def null_distribution(
    n0: int, n1: int, oc: OperatingCondition,
    cache: CountingCache | None = None, memo: bool = True,
) -> NullDistribution:
    """Exact null distribution for ``n0`` negatives and ``n1`` positives."""
    if n0 < 1 or n1 < 1:
        raise ValueError("both classes need at least one observation")
    validate_oc(oc, for_null=True)
    if memo and cache is None:
        cache = CountingCache()
    scale = cost_scale(oc, n0, n1)
    cache = cache if memo else None
    cells = {}
    for fn in range(n1 + 1):
        for fp in range(n0 + 1):
            cells[CellIndex(fn, fp)] = sum(
                _count_orientation((fn, fp), n0, n1, scale, left, cache) for left in (True, False)
            )
    nd = NullDistribution.from_cells(n0, n1, oc, cells)
    got = sum(cells.values())
    if got != nd.total:
        raise PartitionSumMismatch(f"cell counts sum to {got}, expected C({n0 + n1},{n0}) = {nd.total}")
    return nd


def p_value(nd: NullDistribution, observed) -> Fraction:
    """``P[ETC <= observed]`` under the null; small errors are the extreme side."""
    return Fraction(nd.cdf_count(observed), nd.total)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def dumps_nd(nd: NullDistribution) -> str:
    lines = [
        FORMAT_HEADER,
        f"n0={nd.n0}",
        f"n1={nd.n1}",
        f"c0={format_rational(nd.oc.c0)}",
        f"c1={format_rational(nd.oc.c1)}",
        f"pi1={format_rational(nd.oc.pi1)}",
    ]
    lines += [f"cell {c.fn} {c.fp} {v}" for c, v in nd.cells.items()]
    lines += [f"support {format_rational(v)} {c}" for v, c in nd.support]
    lines.append(f"total {nd.total}")
    return "\n".join(lines) + "\n"


def loads_nd(text: str) -> NullDistribution:
    lines = text.split("\n")
    if not lines or lines[0].strip() != FORMAT_HEADER:
        raise FormatVersionMismatch(f"expected header {FORMAT_HEADER!r}, got {lines[0]!r}")
    header, cells, support, total = {}, {}, [], None
    try:
        for line in lines[1:]:
            if not line.strip():
                continue
            if "=" in line and not line.startswith(("cell", "support", "total")):
                key, val = line.split("=", 1)
                header[key.strip()] = val.strip()
                continue
            kind, *rest = line.split()
            if kind == "cell":
                cells[CellIndex(int(rest[0]), int(rest[1]))] = int(rest[2])
            elif kind == "support":
                support.append((Fraction(rest[0]), int(rest[1])))
            elif kind == "total":
                total = int(rest[0])
            else:
                raise ValueError(f"unknown record {kind!r}")
        n0, n1 = int(header["n0"]), int(header["n1"])
        oc = OperatingCondition(header["c0"], header["c1"], header["pi1"])
    except (KeyError, IndexError, ValueError) as exc:
        raise FormatVersionMismatch(f"malformed ND file: {exc}") from exc
    if total is None:
        raise ChecksumMismatch("missing total record")
    if sum(cells.values()) != total or sum(c for _, c in support) != total:
        raise ChecksumMismatch("declared total does not match the stored counts")
    if total != math.comb(n0 + n1, n0):
        raise ChecksumMismatch(f"total {total} is not C({n0 + n1},{n0})")
    nd = NullDistribution.from_cells(n0, n1, oc, cells)
    if nd.support != tuple(support):
        raise ChecksumMismatch("support records disagree with the cell counts")
    return nd


def save_nd(nd: NullDistribution, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_nd(nd))


def load_nd(path) -> NullDistribution:
    with open(path, encoding="utf-8") as fh:
        return loads_nd(fh.read())


def write_nd_csv(nd: NullDistribution, path) -> None:
    """Value, exact value, probability and cumulative probability per support point."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["value", "exact_value", "probability", "cumulative"])
        for (v, _), p, cum in zip(nd.support, nd.probabilities(), nd.cumulative()):
            writer.writerow([f"{float(v):.17g}", format_rational(v), f"{float(p):.17g}", f"{float(cum):.17g}"])


def cache_key(n0: int, n1: int, oc: OperatingCondition) -> str:
    canon = f"n0={n0};n1={n1};{oc.canonical()}"
    return hashlib.sha256(canon.encode()).hexdigest()[:20]


class NDCache:
    """Directory of ND files, one per ``(n0, n1, oc)``.

    ``computed`` counts distributions built rather than loaded.
    """

    def __init__(self, directory=None):
        directory = directory or os.environ.get("ETC_CACHE_DIR")
        self.directory = Path(directory) if directory else None
        self.computed = 0
        self._memory = {}

    def path_for(self, n0, n1, oc) -> Path | None:
        if self.directory is None:
            return None
        return self.directory / f"nd-{n0}-{n1}-{cache_key(n0, n1, oc)}.txt"

    def get(self, n0: int, n1: int, oc: OperatingCondition) -> NullDistribution:
        key = (n0, n1, oc)
        if key in self._memory:
            return self._memory[key]
        path = self.path_for(n0, n1, oc)
        if path is not None and path.exists():
            nd = load_nd(path)
            if not nd.matches(n0, n1, oc):
                raise ChecksumMismatch(f"{path} holds a different distribution")
        else:
            nd = null_distribution(n0, n1, oc)
            self.computed += 1
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                save_nd(nd, path)
                log.info("cached null distribution at %s", path)
        self._memory[key] = nd
        return nd
