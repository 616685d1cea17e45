"""Label permutations, the partition map and a brute-force reference.

Under the null hypothesis the statistic only depends on the sequence of
labels sorted by value, and every such sequence is equally likely.  This
module evaluates the statistic on a label sequence, maps each sequence to
its ``(fn, fp)`` cell, and enumerates all sequences for small samples.  The
enumeration is the reference the recursive counting engine is checked
against.
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import EnumerationTooLarge, TiedAcrossClasses
from .estimator import (
    LabeledSample,
    OperatingCondition,
    cost_scale,
    validate_oc,
)

MAX_ENUMERATION_N = 28


class Orientation(str, enum.Enum):
    LEFT = "positives-left"
    RIGHT = "positives-right"


@dataclass(frozen=True)
class LabelPermutation:
    """Class labels ordered by increasing value."""

    labels: tuple

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels)
        if any(v not in (0, 1) for v in labels):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def n1(self) -> int:
        return sum(self.labels)

    @property
    def n0(self) -> int:
        return self.n - self.n1


class CellIndex(NamedTuple):
    fn: int
    fp: int


def rank_reduce(sample: LabeledSample) -> LabelPermutation:
    order = np.argsort(sample.values, kind="stable")
    xs = sample.values[order]
    ys = sample.labels[order]
    tied = xs[1:] == xs[:-1]
    if np.any(tied & (ys[1:] != ys[:-1])):
        raise TiedAcrossClasses("cannot rank-reduce: equal values with different labels")
    return LabelPermutation(tuple(ys))


def _branch_scores(p: LabelPermutation, oc: OperatingCondition):
    """Integer errors of ``x < x_(i)`` and ``x >= x_(i)`` for ``i = 1..n``."""
    n0, n1 = p.n0, p.n1
    scale = cost_scale(oc, n0, n1)
    left, right = [], []
    pos_before = neg_before = 0
    for y in p.labels:
        left.append(scale.score(fn=n1 - pos_before, fp=neg_before))
        right.append(scale.score(fn=pos_before, fp=n0 - neg_before))
        pos_before += y
        neg_before += 1 - y
    return left, right, scale


def etc_on_permutation(p: LabelPermutation, oc: OperatingCondition) -> Fraction:
    validate_oc(oc)
    left, right, scale = _branch_scores(p, oc)
    return Fraction(min(min(left), min(right)), scale.denominator)


def phi_with_index(p: LabelPermutation, oc: OperatingCondition):
    """Return ``(cell, orientation, i)`` with ``i`` the 1-based threshold index."""
    validate_oc(oc, for_null=True)
    left, right, _ = _branch_scores(p, oc)
    best_left, best_right = min(left), min(right)
    if best_left <= best_right:
        i = left.index(best_left) + 1
        fn = sum(p.labels[i - 1:])
        fp = sum(1 - y for y in p.labels[: i - 1])
        return CellIndex(fn, fp), Orientation.LEFT, i
    i = right.index(best_right) + 1
    fn = sum(p.labels[: i - 1])
    fp = sum(1 - y for y in p.labels[i - 1:])
    return CellIndex(fn, fp), Orientation.RIGHT, i


def phi(p: LabelPermutation, oc: OperatingCondition):
    """Partition map: the optimal ``(fn, fp)`` cell and its orientation.

    Ambiguities are resolved by taking the smallest minimising index and by
    preferring positives on the left when both directions are optimal.
    """
    cell, orientation, _ = phi_with_index(p, oc)
    return cell, orientation


def iter_permutations(n0: int, n1: int):
    """All label vectors with ``n0`` zeros and ``n1`` ones, lexicographically."""
    n = n0 + n1
    for zeros in itertools.combinations(range(n), n0):
        labels = [1] * n
        for z in zeros:
            labels[z] = 0
        yield LabelPermutation(tuple(labels))


def enumerate_cells_bruteforce(
    n0: int, n1: int, oc: OperatingCondition, max_n: int = MAX_ENUMERATION_N
) -> dict:
    """Tally ``(cell, orientation)`` over every label permutation."""
    validate_oc(oc, for_null=True)
    if n0 + n1 > max_n:
        raise EnumerationTooLarge(
            f"C({n0 + n1}, {n0}) = {math.comb(n0 + n1, n0)} permutations exceeds the "
            f"enumeration limit n <= {max_n}"
        )
    tally = Counter()
    for p in iter_permutations(n0, n1):
        tally[phi(p, oc)] += 1
    return dict(tally)


def nulldist_bruteforce(n0: int, n1: int, oc: OperatingCondition, max_n: int = MAX_ENUMERATION_N):
    from .nulldist import NullDistribution

    tally = enumerate_cells_bruteforce(n0, n1, oc, max_n=max_n)
    cells = Counter()
    for (cell, _), count in tally.items():
        cells[cell] += count
    return NullDistribution.from_cells(n0, n1, oc, dict(cells))


def write_tally_csv(tally: dict, path) -> None:
    """Write a cell tally with columns ``fn, fp, orientation, count``."""
    rows = sorted(
        ((cell.fn, cell.fp, orient.value, count) for (cell, orient), count in tally.items())
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["fn", "fp", "orientation", "count"])
        writer.writerows(rows)
