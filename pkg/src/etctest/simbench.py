"""Simulation studies comparing ETC with univariate LDA and QDA filters.

Each study draws ``signal_count`` informative and ``noise_count``
uninformative variables, ranks them with each method and records the
filtering performance: the share of signal variables among the top
``signal_count``.

Random streams
--------------
Every ``(study, grid point, replication)`` gets its own
``numpy.random.SeedSequence(seed, spawn_key=(study, *grid indices, rep))``,
which is split into independent child streams for the signal block, the
noise block, contamination and column shuffling.  Results therefore do
not depend on execution order or worker count.  In study C the outlier
fraction is left out of the key of the clean draws, so every outlier
level contaminates the same underlying data.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

from .errors import EmptySignalSet, InvalidGridPoint
from .estimator import OperatingCondition, etc_columns, validate_oc
from .filter import VariableMatrix, cdf_counts
from .nulldist import NDCache

STUDIES = ("A", "B", "C", "D")
METHODS = ("ETC", "LDA", "QDA")
OUTLIER_VARIANCE = 5.0

_DELTA_GRID = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5)
_SIGMA1_GRID = tuple(2.0 ** k for k in range(-3, 4))
_PHI_GRID = (0.0, 0.1, 0.2, 0.3)
_LOG_SIGMA_GRID = tuple(math.sqrt(2.0 ** k) for k in range(-3, 4))


@dataclass(frozen=True)
class StudyConfig:
    study: str
    delta_grid: tuple = _DELTA_GRID
    sigma_grid: tuple = ()  # sigma1 for B, log-scale sigma for D
    phi_grid: tuple = ()
    n0: int = 25
    n1: int = 25
    signal_count: int = 100
    noise_count: int = 9900
    oc: OperatingCondition = field(default_factory=lambda: OperatingCondition(1, 1, "1/2"))
    seed: int = 0
    replications: int = 5

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ValueError(f"study must be one of {STUDIES}, got {self.study!r}")
        if min(self.n0, self.n1, self.signal_count, self.noise_count, self.replications) < 1:
            raise ValueError("counts must be >= 1")
        if not self.delta_grid:
            raise ValueError("delta grid is empty")
        if self.study in "BD" and not self.sigma_grid:
            raise ValueError(f"study {self.study} needs a sigma grid")
        if self.study == "C" and not self.phi_grid:
            raise ValueError("study C needs a phi grid")
        if self.study == "C" and not any(phi == 0 for phi in self.phi_grid):
            raise ValueError("study C needs phi = 0 in its grid to form delta FP")
        if any(not 0 <= phi < 1 for phi in self.phi_grid):
            raise ValueError("outlier fractions must lie in [0, 1)")
        if any(s <= 0 for s in self.sigma_grid):
            raise ValueError("sigmas must be positive")
        validate_oc(self.oc, for_null=True)

    @classmethod
    def desk(cls, study: str, **overrides) -> "StudyConfig":
        """Reduced default scale: 100 signal and 9900 noise variables, n0 = n1 = 25."""
        extra = {
            "B": {"sigma_grid": _SIGMA1_GRID},
            "C": {"phi_grid": _PHI_GRID},
            "D": {"sigma_grid": _LOG_SIGMA_GRID},
        }.get(study, {})
        return cls(study=study, **{**extra, **overrides})

    @classmethod
    def full(cls, study: str, **overrides) -> "StudyConfig":
        """Full scale: 1000 signal, 99000 noise variables, n = 100."""
        return cls.desk(study, signal_count=1000, noise_count=99000, n0=50, n1=50, **overrides)

    @property
    def axes(self) -> dict:
        second = {"B": "sigma1", "C": "phi", "D": "sigma"}.get(self.study)
        axes = {"delta": tuple(self.delta_grid)}
        if second == "phi":
            axes[second] = tuple(self.phi_grid)
        elif second:
            axes[second] = tuple(self.sigma_grid)
        return axes

    def grid_points(self):
        names = list(self.axes)
        for combo in itertools.product(*(range(len(v)) for v in self.axes.values())):
            yield {name: self.axes[name][i] for name, i in zip(names, combo)}, combo


def signal_names(cfg: StudyConfig) -> list:
    return [f"signal{j:05d}" for j in range(cfg.signal_count)]


def noise_names(cfg: StudyConfig) -> list:
    return [f"noise{j:06d}" for j in range(cfg.noise_count)]


def _grid_indices(cfg: StudyConfig, grid_point: dict):
    idx = []
    for name, values in cfg.axes.items():
        if name not in grid_point:
            raise InvalidGridPoint(f"grid point lacks {name!r}")
        matches = [i for i, v in enumerate(values) if math.isclose(v, grid_point[name])]
        if not matches:
            raise InvalidGridPoint(f"{name}={grid_point[name]} is not on the grid {values}")
        idx.append(matches[0])
    return tuple(idx)


def _streams(cfg: StudyConfig, key: tuple, n: int):
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(STUDIES.index(cfg.study), *key))
    return [np.random.default_rng(child) for child in ss.spawn(n)]


def generate_study(cfg: StudyConfig, grid_point: dict, replication: int = 0) -> VariableMatrix:
    """One data matrix for ``grid_point``; the first ``n1`` rows are positives.

    Column order is shuffled so that rank ties are not resolved in favour
    of either block.
    """
    idx = _grid_indices(cfg, grid_point)
    n0, n1, n = cfg.n0, cfg.n1, cfg.n0 + cfg.n1
    s, m = cfg.signal_count, cfg.noise_count
    delta = float(grid_point["delta"])

    base_key = idx[:1] if cfg.study == "C" else idx
    rng_sig, rng_noise, rng_shuffle = _streams(cfg, (*base_key, replication), 3)

    if cfg.study in "AC":
        pos = rng_sig.normal(delta, 1.0, (n1, s))
        neg = rng_sig.normal(0.0, 1.0, (n0, s))
        noise = rng_noise.normal(0.0, 1.0, (n, m))
    elif cfg.study == "B":
        sigma1 = float(grid_point["sigma1"])
        pos = rng_sig.normal(delta, sigma1, (n1, s))
        neg = rng_sig.normal(0.0, 1.0 / sigma1, (n0, s))
        noise = rng_noise.normal(0.0, 1.0, (n, m))
    else:
        sigma = float(grid_point["sigma"])
        pos = np.exp(rng_sig.normal(0.0, sigma, (n1, s)))
        neg = np.exp(rng_sig.normal(0.0, sigma, (n0, s)) - delta)
        noise = np.exp(rng_noise.normal(0.0, sigma, (n, m)))

    if cfg.study == "C":
        phi = float(grid_point["phi"])
        (rng_out,) = _streams(cfg, (*idx, replication, 1), 1)
        k1, k0, kn = math.floor(phi * n1), math.floor(phi * n0), math.floor(phi * n)
        sd = math.sqrt(OUTLIER_VARIANCE)
        # classes are exchangeable within themselves: contaminate the last k rows
        if k1:
            pos[-k1:] = rng_out.normal(delta, sd, (k1, s))
        if k0:
            neg[-k0:] = rng_out.normal(0.0, sd, (k0, s))
        if kn:
            # random rows per noise variable so noise stays independent of the labels
            rows = np.argsort(rng_out.random((n, m)), axis=0)[:kn]
            noise[rows, np.arange(m)] = rng_out.normal(0.0, sd, (kn, m))

    data = np.hstack([np.vstack([pos, neg]), noise])
    names = signal_names(cfg) + noise_names(cfg)
    perm = rng_shuffle.permutation(s + m)
    labels = np.r_[np.ones(n1, dtype=np.int8), np.zeros(n0, dtype=np.int8)]
    return VariableMatrix([names[j] for j in perm], data[:, perm], labels)


# ---------------------------------------------------------------------------
# Gaussian plug-in baselines
# ---------------------------------------------------------------------------


class GaussianFit(NamedTuple):
    mean0: np.ndarray
    mean1: np.ndarray
    var0: np.ndarray
    var1: np.ndarray
    pooled_var: np.ndarray


class Region(NamedTuple):
    """Positive region ``[lower, upper]`` if ``inside`` else its complement."""

    lower: np.ndarray
    upper: np.ndarray
    inside: np.ndarray
    plugin_epe: np.ndarray
    degenerate: np.ndarray


def fit_gaussian(data, labels) -> GaussianFit:
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    labels = np.asarray(labels).ravel()
    x0, x1 = data[labels == 0], data[labels == 1]
    n0, n1 = len(x0), len(x1)
    if n0 == 0 or n1 == 0:
        raise ValueError("both classes must be present")
    var0, var1 = x0.var(axis=0), x1.var(axis=0)
    pooled = (n0 * var0 + n1 * var1) / (n0 + n1)
    return GaussianFit(x0.mean(axis=0), x1.mean(axis=0), var0, var1, pooled)


def _weights(oc):
    validate_oc(oc, for_null=True)
    return float(oc.weight0), float(oc.weight1)


def _mass(mu, sd, lo, hi):
    """Normal probability of ``[lo, hi]``; a zero ``sd`` is a point mass."""
    with np.errstate(divide="ignore", invalid="ignore"):
        zl = np.where(sd > 0, (lo - mu) / sd, np.where(lo <= mu, -np.inf, np.inf))
        zh = np.where(sd > 0, (hi - mu) / sd, np.where(hi >= mu, np.inf, -np.inf))
    # upper-tail form keeps precision when both bounds sit far right
    mass = np.where(zl > 0, ndtr(-zl) - ndtr(-zh), ndtr(zh) - ndtr(zl))
    return np.maximum(mass, 0.0)


def _epe(w0, w1, mu0, sd0, mu1, sd1, lo, hi, inside):
    p0 = _mass(mu0, sd0, lo, hi)
    p1 = _mass(mu1, sd1, lo, hi)
    return np.where(inside, w0 * p0 + w1 * (1 - p1), w0 * (1 - p0) + w1 * p1)


def _trivial(w0, w1, shape):
    # all-positive costs w0, all-negative costs w1
    inside = np.full(shape, w0 <= w1)
    return np.full(shape, -np.inf), np.full(shape, np.inf), inside, np.full(shape, min(w0, w1))


def lda_region(mean0, mean1, pooled_var, oc: OperatingCondition) -> Region:
    """Equal-variance Gaussian boundary under the operating condition.

    ``t = (m0 + m1)/2 + s2 * ln(c0 pi0 / (c1 pi1)) / (m1 - m0)`` with the
    positive region on the side of ``m1``.
    """
    w0, w1 = _weights(oc)
    mean0, mean1, pooled_var = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (mean0, mean1, pooled_var)))
    shape = mean0.shape
    degenerate = (pooled_var <= 0) | (mean1 == mean0)
    diff = np.where(degenerate, 1.0, mean1 - mean0)
    t = (mean0 + mean1) / 2 + pooled_var * math.log(w0 / w1) / diff
    above = mean1 > mean0
    lo = np.where(above, t, -np.inf)
    hi = np.where(above, np.inf, t)
    inside = np.ones(shape, dtype=bool)
    sd = np.sqrt(np.maximum(pooled_var, 0))
    epe = _epe(w0, w1, mean0, sd, mean1, sd, lo, hi, inside)
    tlo, thi, tin, tepe = _trivial(w0, w1, shape)
    return Region(
        np.where(degenerate, tlo, lo),
        np.where(degenerate, thi, hi),
        np.where(degenerate, tin, inside),
        np.where(degenerate, tepe, epe),
        degenerate,
    )


def qda_region(mean0, mean1, var0, var1, oc: OperatingCondition) -> Region:
    """Class-specific-variance Gaussian Bayes region: an interval or its complement.

    Solves ``ln(c1 pi1 f1(x)) = ln(c0 pi0 f0(x))``.  Equal variances reduce
    to ``lda_region``.  A zero class variance makes that class a point
    mass: the region is the single point (or everything but it), at zero
    plug-in error.
    """
    w0, w1 = _weights(oc)
    mean0, mean1, var0, var1 = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (mean0, mean1, var0, var1))
    )
    shape = mean0.shape
    equal = var0 == var1
    point1 = (var1 <= 0) & (var0 > 0)
    point0 = (var0 <= 0) & (var1 > 0)
    both = (var0 <= 0) & (var1 <= 0)

    with np.errstate(divide="ignore", invalid="ignore"):
        a = 0.5 / var0 - 0.5 / var1
        b = mean1 / var1 - mean0 / var0
        c = (
            mean0**2 / (2 * var0)
            - mean1**2 / (2 * var1)
            + math.log(w1 / w0)
            + 0.5 * np.log(var0 / var1)
        )
        disc = b * b - 4 * a * c
        root = np.sqrt(np.maximum(disc, 0))
        # numerically stable quadratic roots
        q = -0.5 * (b + np.copysign(root, b))
        r1 = q / a
        r2 = np.where(q != 0, c / q, -r1)
    lo = np.minimum(r1, r2)
    hi = np.maximum(r1, r2)
    real = disc > 0
    # a > 0: log ratio opens upward, positive outside the roots
    inside = a < 0
    lo = np.where(real, lo, -np.inf)
    hi = np.where(real, hi, np.inf)
    # no real roots with a > 0: positive everywhere -> complement of an empty set
    no_root_up = ~real & (a > 0)
    lo = np.where(no_root_up, np.inf, lo)
    hi = np.where(no_root_up, -np.inf, hi)
    # no real roots with a < 0: nowhere positive -> empty interval
    no_root_down = ~real & (a < 0)
    lo = np.where(no_root_down, np.inf, lo)
    hi = np.where(no_root_down, -np.inf, hi)

    sd0, sd1 = np.sqrt(np.maximum(var0, 0)), np.sqrt(np.maximum(var1, 0))
    epe = _epe(w0, w1, mean0, sd0, mean1, sd1, lo, hi, inside)

    lin = lda_region(mean0, mean1, var0, oc)
    lo = np.where(equal, lin.lower, lo)
    hi = np.where(equal, lin.upper, hi)
    inside = np.where(equal, lin.inside, inside)
    epe = np.where(equal, lin.plugin_epe, epe)

    lo = np.where(point1, mean1, np.where(point0, mean0, lo))
    hi = np.where(point1, mean1, np.where(point0, mean0, hi))
    inside = np.where(point1, True, np.where(point0, False, inside))
    epe = np.where(point1 | point0, 0.0, epe)
    degenerate = point0 | point1 | both | (equal & lin.degenerate)
    tlo, thi, tin, tepe = _trivial(w0, w1, shape)
    separated = both & (mean0 != mean1)
    lo = np.where(both, np.where(separated, mean1, tlo), lo)
    hi = np.where(both, np.where(separated, mean1, thi), hi)
    inside = np.where(both, np.where(separated, True, tin), inside)
    epe = np.where(both, np.where(separated, 0.0, tepe), epe)
    return Region(lo, hi, inside, epe, degenerate)


def _scalar(region: Region) -> Region:
    return Region(*(np.asarray(v).ravel()[0].item() for v in region))


def lda_score(column, labels, oc: OperatingCondition) -> Region:
    """Fit LDA to one variable; ``plugin_epe`` ranks it (lower is better)."""
    fit = fit_gaussian(column, labels)
    return _scalar(lda_region(fit.mean0, fit.mean1, fit.pooled_var, oc))


def qda_score(column, labels, oc: OperatingCondition) -> Region:
    fit = fit_gaussian(column, labels)
    return _scalar(qda_region(fit.mean0, fit.mean1, fit.var0, fit.var1, oc))


# ---------------------------------------------------------------------------
# Ranking and filtering performance
# ---------------------------------------------------------------------------


def filtering_performance(ranking, signal) -> float:
    """Share of signal variables among the first ``len(signal)`` of ``ranking``."""
    signal = set(signal)
    if not signal:
        raise EmptySignalSet("no signal variables")
    if len(ranking) < len(signal):
        raise ValueError("ranking is shorter than the signal set")
    return sum(name in signal for name in ranking[: len(signal)]) / len(signal)


def rank_etc(m: VariableMatrix, oc: OperatingCondition, nd_cache: NDCache | None = None) -> list:
    """Variable names by ascending ETC p-value, ties in column order."""
    nd_cache = nd_cache or NDCache()
    nd = nd_cache.get(m.n0, m.n1, oc)
    cols = etc_columns(m.data, m.labels, oc, conservative=True)
    counts = np.array(cdf_counts(nd, cols.score, cols.scale.denominator), dtype=object)
    order = sorted(range(len(m.names)), key=lambda j: (counts[j], cols.score[j], j))
    return [m.names[j] for j in order]


def rank_lda(m: VariableMatrix, oc: OperatingCondition) -> list:
    fit = fit_gaussian(m.data, m.labels)
    epe = lda_region(fit.mean0, fit.mean1, fit.pooled_var, oc).plugin_epe
    return [m.names[j] for j in np.argsort(epe, kind="stable")]


def rank_qda(m: VariableMatrix, oc: OperatingCondition) -> list:
    fit = fit_gaussian(m.data, m.labels)
    epe = qda_region(fit.mean0, fit.mean1, fit.var0, fit.var1, oc).plugin_epe
    return [m.names[j] for j in np.argsort(epe, kind="stable")]


def _log_matrix(m: VariableMatrix) -> VariableMatrix:
    return VariableMatrix(m.names, np.log(m.data), m.labels)


def evaluate_replication(cfg: StudyConfig, grid_point: dict, replication: int) -> dict:
    """FP of every method for one generated matrix.

    Study D additionally reports ``ETC[log]`` and ``LDA[log]``, the same
    methods applied to the log-transformed (Gaussian) data.
    """
    m = generate_study(cfg, grid_point, replication)
    signal = signal_names(cfg)
    out = {
        "ETC": filtering_performance(rank_etc(m, cfg.oc), signal),
        "LDA": filtering_performance(rank_lda(m, cfg.oc), signal),
        "QDA": filtering_performance(rank_qda(m, cfg.oc), signal),
    }
    if cfg.study == "D":
        logged = _log_matrix(m)
        out["ETC[log]"] = filtering_performance(rank_etc(logged, cfg.oc), signal)
        out["LDA[log]"] = filtering_performance(rank_lda(logged, cfg.oc), signal)
    return out


def _task(args):
    cfg, point, rep = args
    return evaluate_replication(cfg, point, rep)


@dataclass
class FilteringPerformanceGrid:
    """FP per grid point and method; ``fp[(point, method)]`` lists replications."""

    config: StudyConfig
    axes: dict
    fp: dict = field(default_factory=dict)

    @property
    def methods(self):
        seen = []
        for _, method in self.fp:
            if method not in seen:
                seen.append(method)
        return seen

    def values(self, method: str, **coords) -> list:
        key = tuple(coords[name] for name in self.axes)
        return self.fp[(key, method)]

    def mean(self, method: str, **coords) -> float:
        return float(np.mean(self.values(method, **coords)))

    def delta_fp(self, method: str, **coords) -> list:
        """Per-replication ``FP(phi) - FP(0)`` (study C)."""
        base = {**coords, "phi": 0.0}
        return [a - b for a, b in zip(self.values(method, **coords), self.values(method, **base))]

    def rows(self) -> list:
        rows = []
        for (key, method), vals in self.fp.items():
            row = dict(zip(self.axes, key))
            row.update(method=method, **_summary("fp", vals))
            if "phi" in self.axes:
                coords = dict(zip(self.axes, key))
                row.update(_summary("delta_fp", self.delta_fp(method, **coords)))
            row["replications"] = len(vals)
            rows.append(row)
        return rows


def _summary(prefix, vals):
    vals = np.asarray(vals, dtype=float)
    se = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else float("nan")
    return {f"{prefix}_mean": float(vals.mean()), f"{prefix}_se": float(se)}


def run_study(cfg: StudyConfig, workers: int = 1, points=None) -> FilteringPerformanceGrid:
    """Evaluate every grid point and replication.

    ``points`` restricts the run to a subset of grid points (dicts of axis
    values); study C always includes the matching ``phi = 0`` points.
    """
    all_points = [p for p, _ in cfg.grid_points()]
    if points is not None:
        wanted = [dict(p) for p in points]
        if cfg.study == "C":
            wanted += [{**p, "phi": 0.0} for p in wanted]
        for p in wanted:
            _grid_indices(cfg, p)
        all_points = [p for p in all_points if any(_same_point(p, w) for w in wanted)]
    tasks = [(cfg, p, r) for p in all_points for r in range(cfg.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    grid = FilteringPerformanceGrid(cfg, cfg.axes)
    for (_, point, _), res in zip(tasks, results):
        key = tuple(point[name] for name in cfg.axes)
        for method, value in res.items():
            grid.fp.setdefault((key, method), []).append(value)
    return grid


def _same_point(a, b):
    return all(math.isclose(a[k], b[k]) for k in a)


def write_grid_csv(grid: FilteringPerformanceGrid, path) -> None:
    rows = grid.rows()
    cols = list(grid.axes) + ["method", "fp_mean", "fp_se"]
    if "phi" in grid.axes:
        cols += ["delta_fp_mean", "delta_fp_se"]
    cols.append("replications")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()})
