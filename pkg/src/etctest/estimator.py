"""Operating conditions, labeled samples and the ETC statistic.

The statistic is the smallest cost-weighted empirical prediction error over
all threshold classifiers ``x < t`` and ``x >= t`` with ``t`` an observed
value.  Arithmetic is exact: costs and prevalences are ``Fraction`` objects
and the per-threshold errors are compared as integers on a common
denominator, so no floating point enters the minimisation.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import NamedTuple, Union

import numpy as np

from .errors import (
    DegenerateOperatingCondition,
    IndexOutOfRange,
    NegativeCost,
    PrevalenceOutOfRange,
    SingleClassSample,
    TiedAcrossClasses,
)

Rational = Union[Fraction, int, str, Decimal, float]


def as_rational(x: Rational) -> Fraction:
    """Convert ``x`` to an exact ``Fraction``.

    Strings may be decimals (``"0.1"``) or ratios (``"1/3"``) and are
    converted exactly.  Floats go through their shortest ``repr`` so that
    ``0.1`` becomes ``1/10`` rather than its binary expansion.
    """
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Decimal)):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot interpret {x!r} as a rational")


def format_rational(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class OperatingCondition:
    """Misclassification costs ``c0``, ``c1`` and positive prevalence ``pi1``."""

    c0: Fraction
    c1: Fraction
    pi1: Fraction

    def __post_init__(self):
        for name in ("c0", "c1", "pi1"):
            object.__setattr__(self, name, as_rational(getattr(self, name)))

    @property
    def pi0(self) -> Fraction:
        return 1 - self.pi1

    @property
    def weight0(self) -> Fraction:
        """``c0 * pi0``, the cost of a false positive rate of one."""
        return self.c0 * self.pi0

    @property
    def weight1(self) -> Fraction:
        return self.c1 * self.pi1

    @property
    def max_value(self) -> Fraction:
        """Statistic of the better trivial classifier, an upper bound."""
        return min(self.weight0, self.weight1)

    def cost(self, fn: int, fp: int, n0: int, n1: int) -> Fraction:
        return self.weight0 * Fraction(fp, n0) + self.weight1 * Fraction(fn, n1)

    def canonical(self) -> str:
        return ";".join(format_rational(q) for q in (self.c0, self.c1, self.pi1))


def validate_oc(oc: OperatingCondition, for_null: bool = False) -> OperatingCondition:
    """Return ``oc`` unchanged or raise.

    With ``for_null`` both classes must carry positive weight; otherwise
    every permutation has the same statistic and there is nothing to test.
    """
    if oc.c0 < 0 or oc.c1 < 0:
        raise NegativeCost(f"costs must be nonnegative, got c0={oc.c0}, c1={oc.c1}")
    if not 0 <= oc.pi1 <= 1:
        raise PrevalenceOutOfRange(f"pi1 must lie in [0, 1], got {oc.pi1}")
    if for_null and (oc.weight0 <= 0 or oc.weight1 <= 0):
        raise DegenerateOperatingCondition(
            f"c0*pi0={oc.weight0} and c1*pi1={oc.weight1} must both be positive"
        )
    return oc


class CostScale(NamedTuple):
    """Integer encoding of the statistic for fixed ``(n0, n1, oc)``.

    ``value = (fp_weight * fp + fn_weight * fn) / denominator``.
    """

    fp_weight: int
    fn_weight: int
    denominator: int

    def value(self, fn: int, fp: int) -> Fraction:
        return Fraction(self.fp_weight * fp + self.fn_weight * fn, self.denominator)

    def score(self, fn: int, fp: int) -> int:
        return self.fp_weight * fp + self.fn_weight * fn


@functools.lru_cache(maxsize=1024)
def cost_scale(oc: OperatingCondition, n0: int, n1: int) -> CostScale:
    u = oc.weight0 / n0
    v = oc.weight1 / n1
    den = math.lcm(u.denominator, v.denominator)
    return CostScale(int(u * den), int(v * den), den)


# ---------------------------------------------------------------------------
# Samples and rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LabeledSample:
    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        labels = np.asarray(self.labels).ravel()
        if values.shape != labels.shape:
            raise ValueError(
                f"values and labels differ in length ({values.size} vs {labels.size})"
            )
        if values.size < 2:
            raise ValueError("a sample needs at least two observations")
        if np.isnan(values).any():
            raise ValueError("NaN values are not allowed")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels.astype(np.int8))

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def n1(self) -> int:
        return int(self.labels.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1


class Direction(str, enum.Enum):
    BELOW = "below"  # positives in (-inf, t)
    AT_OR_ABOVE = "at-or-above"  # positives in [t, inf)


@dataclass(frozen=True)
class ThresholdRule:
    direction: Direction
    threshold_index: int

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.threshold_index < 1:
            raise IndexOutOfRange(f"threshold_index must be >= 1, got {self.threshold_index}")


@dataclass(frozen=True)
class EtcEstimate:
    value: Fraction
    rule: ThresholdRule
    fn: int
    fp: int
    tie_adjusted: bool = False
    threshold: float = field(default=float("nan"), compare=False)

    @property
    def direction(self) -> Direction:
        return self.rule.direction


def epe_of_rule(sample: LabeledSample, oc: OperatingCondition, rule: ThresholdRule) -> Fraction:
    """Empirical prediction error of a single threshold rule, by direct counting."""
    validate_oc(oc)
    if not 1 <= rule.threshold_index <= sample.n:
        raise IndexOutOfRange(f"threshold_index {rule.threshold_index} not in 1..{sample.n}")
    n0, n1 = sample.n0, sample.n1
    if n0 == 0 or n1 == 0:
        raise SingleClassSample("both classes must be present")
    t = np.sort(sample.values)[rule.threshold_index - 1]
    if rule.direction is Direction.BELOW:
        positive = sample.values < t
    else:
        positive = sample.values >= t
    fp = int(np.sum(positive & (sample.labels == 0)))
    fn = int(np.sum(~positive & (sample.labels == 1)))
    return oc.cost(fn, fp, n0, n1)


# ---------------------------------------------------------------------------
# Vectorised core
# ---------------------------------------------------------------------------


class EtcColumns(NamedTuple):
    """Column-wise results; ``score / scale.denominator`` is the statistic."""

    score: np.ndarray
    fn: np.ndarray
    fp: np.ndarray
    below: np.ndarray
    index: np.ndarray  # 1-based order-statistic index of the threshold
    threshold: np.ndarray
    tie_adjusted: np.ndarray
    cross_ties: np.ndarray
    scale: CostScale

    def value(self, j: int) -> Fraction:
        return Fraction(int(self.score[j]), self.scale.denominator)

    def estimate(self, j: int) -> EtcEstimate:
        direction = Direction.BELOW if self.below[j] else Direction.AT_OR_ABOVE
        return EtcEstimate(
            value=self.value(j),
            rule=ThresholdRule(direction, int(self.index[j])),
            fn=int(self.fn[j]),
            fp=int(self.fp[j]),
            tie_adjusted=bool(self.tie_adjusted[j]),
            threshold=float(self.threshold[j]),
        )


def _score_dtype(scale: CostScale, n0: int, n1: int):
    bound = scale.fp_weight * n0 + scale.fn_weight * n1
    return np.int64 if bound < 2**62 else object


def _minimise(y: np.ndarray, scale: CostScale, n0: int, n1: int, candidates=None):
    """Best threshold for each column of the sorted label matrix ``y``.

    Row ``j`` (0-based) stands for the threshold at the ``j+1``-th order
    statistic.  Among equal errors the smallest index wins, and the
    positives-left direction wins ties between directions.
    """
    dtype = _score_dtype(scale, n0, n1)
    n, m = y.shape
    pos_before = np.zeros((n, m), dtype=np.int64)
    np.cumsum(y[:-1], axis=0, out=pos_before[1:])
    neg_before = np.arange(n, dtype=np.int64)[:, None] - pos_before

    P, R = scale.fp_weight, scale.fn_weight
    left = P * neg_before.astype(dtype) + R * (n1 - pos_before).astype(dtype)
    right = P * (n0 - neg_before).astype(dtype) + R * pos_before.astype(dtype)
    if candidates is not None:
        big = P * n0 + R * n1 + 1
        left = np.where(candidates, left, big)
        right = np.where(candidates, right, big)

    cols = np.arange(m)
    i_left = np.argmin(left, axis=0)
    i_right = np.argmin(right, axis=0)
    s_left = left[i_left, cols]
    s_right = right[i_right, cols]
    below = s_left <= s_right
    idx = np.where(below, i_left, i_right)
    pb = pos_before[idx, cols]
    nb = neg_before[idx, cols]
    fp = np.where(below, nb, n0 - nb)
    fn = np.where(below, n1 - pb, pb)
    score = np.where(below, s_left, s_right)
    return score, fn, fp, below, idx + 1


def _sorted(values: np.ndarray, labels: np.ndarray, negatives_first: bool):
    # pre-order rows by label so the stable value sort keeps that order in ties
    pre = np.argsort(labels if negatives_first else -labels.astype(int), kind="stable")
    order = pre[np.argsort(values[pre], axis=0, kind="stable")]
    return np.take_along_axis(values, order, 0), labels[order]


def etc_columns(values, labels, oc: OperatingCondition, conservative: bool = True) -> EtcColumns:
    """ETC statistic for every column of ``values`` (shape ``(n, m)``).

    With ``conservative`` thresholds are placed only where the sorted value
    changes, so tied values are never split.  Otherwise every order
    statistic is a candidate, which is only meaningful when no tie mixes
    the two classes.
    """
    validate_oc(oc)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    labels = np.asarray(labels).astype(np.int8).ravel()
    n1 = int(labels.sum())
    n0 = labels.size - n1
    if n0 == 0 or n1 == 0:
        raise SingleClassSample("both classes must be present")
    scale = cost_scale(oc, n0, n1)

    xs_neg, y_neg = _sorted(values, labels, negatives_first=True)
    xs_pos, y_pos = _sorted(values, labels, negatives_first=False)
    cross_ties = (y_neg != y_pos).any(axis=0)

    s_neg = _minimise(y_neg, scale, n0, n1)
    if conservative:
        starts = np.ones(values.shape, dtype=bool)
        starts[1:] = xs_neg[1:] != xs_neg[:-1]
        res = _minimise(y_neg, scale, n0, n1, candidates=starts)
        s_pos = _minimise(y_pos, scale, n0, n1)
        tie_adjusted = (res[0] != s_neg[0]) | (res[0] != s_pos[0])
    else:
        res = s_neg
        tie_adjusted = np.zeros(values.shape[1], dtype=bool)
    score, fn, fp, below, index = res
    threshold = xs_neg[index - 1, np.arange(values.shape[1])]
    return EtcColumns(score, fn, fp, below, index, threshold, tie_adjusted, cross_ties, scale)


def etc_hat(sample: LabeledSample, oc: OperatingCondition) -> EtcEstimate:
    """Minimum empirical prediction error over all ``2n`` threshold rules.

    Raises ``TiedAcrossClasses`` if equal values carry different labels,
    since the result would then depend on an arbitrary ordering.
    """
    _require_both(sample)
    cols = etc_columns(sample.values, sample.labels, oc, conservative=False)
    if cols.cross_ties[0]:
        raise TiedAcrossClasses("sample has equal values with different labels")
    return cols.estimate(0)


def etc_hat_conservative(sample: LabeledSample, oc: OperatingCondition) -> EtcEstimate:
    """ETC statistic that never places a threshold inside a group of tied values.

    The result is at least as large as the statistic under either extreme
    within-tie ordering (all negatives first, all positives first), hence
    its p-value is conservative.  ``tie_adjusted`` is set when the result
    differs from either of those orderings.
    """
    _require_both(sample)
    return etc_columns(sample.values, sample.labels, oc, conservative=True).estimate(0)


def _require_both(sample: LabeledSample):
    if sample.n0 == 0 or sample.n1 == 0:
        raise SingleClassSample("both classes must be present")
