import math
from collections import Counter
from fractions import Fraction

import pytest

from etctest.errors import ChecksumMismatch, DegenerateOperatingCondition, FormatVersionMismatch, InvalidCell
from etctest.estimator import OperatingCondition
from etctest.nulldist import (
    CountingCache,
    Domain,
    NDCache,
    QuadrantSpec,
    count_cell,
    count_orientation,
    count_quadrant,
    dumps_nd,
    load_nd,
    loads_nd,
    null_distribution,
    p_value,
    save_nd,
    write_nd_csv,
)
from etctest.permutation import CellIndex, Orientation, enumerate_cells_bruteforce, nulldist_bruteforce

from conftest import OC_GRID

LEFT, RIGHT = Orientation.LEFT, Orientation.RIGHT


# -- worked example: n0 = n1 = 9, costs (1, 2) -------------------------------


def test_worked_positive_domain(cost2_oc):
    spec = QuadrantSpec(Domain.POSITIVE, LEFT, CellIndex(1, 2), 9, 9, cost2_oc)
    assert count_quadrant(spec) == 35  # 2 + 3 + ... + 8


def test_worked_negative_domain(cost2_oc):
    spec = QuadrantSpec(Domain.NEGATIVE, LEFT, CellIndex(1, 2), 9, 9, cost2_oc)
    assert count_quadrant(spec) == 6


def test_worked_orientation_product(cost2_oc):
    assert count_orientation(CellIndex(1, 2), 9, 9, cost2_oc, LEFT) == 210


@pytest.mark.parametrize("oc", OC_GRID)
def test_separated_cell_has_two_orderings(oc):
    assert count_cell(CellIndex(0, 0), 9, 9, oc) == 2


@pytest.mark.parametrize("oc", OC_GRID)
@pytest.mark.parametrize("orientation", list(Orientation))
def test_empty_false_set_counts_one(oc, orientation):
    # cell (0, 0): both domains are pure and admit exactly one arrangement
    for domain in Domain:
        assert count_quadrant(QuadrantSpec(domain, orientation, (0, 0), 5, 4, oc)) == 1


def test_quadrant_spec_validation(cost2_oc):
    with pytest.raises(InvalidCell):
        QuadrantSpec(Domain.POSITIVE, LEFT, (10, 0), 9, 9, cost2_oc)
    with pytest.raises(DegenerateOperatingCondition):
        QuadrantSpec(Domain.POSITIVE, LEFT, (0, 0), 9, 9, OperatingCondition(0, 1, "1/2"))


# -- oracle equivalence -----------------------------------------------------


def _oracle_orientation_counts(n0, n1, oc):
    return enumerate_cells_bruteforce(n0, n1, oc)


@pytest.mark.parametrize("oc", OC_GRID, ids=lambda oc: oc.canonical())
def test_engine_matches_bruteforce(oc):
    for n in range(2, 11):
        for n0 in range(1, n):
            n1 = n - n0
            oracle = _oracle_orientation_counts(n0, n1, oc)
            cache = CountingCache()
            for fn in range(n1 + 1):
                for fp in range(n0 + 1):
                    for orient in Orientation:
                        got = count_orientation((fn, fp), n0, n1, oc, orient, cache)
                        assert got == oracle.get((CellIndex(fn, fp), orient), 0), (n0, n1, fn, fp, orient)


def test_three_by_three_cells(sym_oc):
    oracle = Counter()
    for (cell, _), c in enumerate_cells_bruteforce(3, 3, sym_oc).items():
        oracle[cell] += c
    nd = null_distribution(3, 3, sym_oc)
    assert {c: v for c, v in nd.cells.items() if v} == dict(oracle)


@pytest.mark.parametrize("oc", OC_GRID[:3])
def test_memo_transparency(oc):
    for n0, n1 in [(6, 6), (5, 7), (8, 4)]:
        assert null_distribution(n0, n1, oc, memo=True) == null_distribution(n0, n1, oc, memo=False)


def test_shared_cache_across_distributions(cost2_oc):
    cache = CountingCache()
    a = null_distribution(7, 7, cost2_oc, cache=cache)
    b = null_distribution(7, 7, cost2_oc, cache=cache)
    assert a == b == null_distribution(7, 7, cost2_oc, memo=False)


# -- distribution and p-values ----------------------------------------------


def test_nine_by_nine_distribution(cost2_oc):
    nd = null_distribution(9, 9, cost2_oc)
    assert nd.total == 48620
    assert p_value(nd, 0) == Fraction(2, 48620)
    assert p_value(nd, cost2_oc.max_value) == 1
    assert nd.cumulative()[-1] == 1
    assert nd.support[-1][0] <= cost2_oc.max_value


def test_two_by_two_matches_bruteforce(sym_oc):
    assert null_distribution(2, 2, sym_oc) == nulldist_bruteforce(2, 2, sym_oc)


def test_p_value_mid_support(sym_oc):
    nd = null_distribution(3, 3, sym_oc)
    oracle = nulldist_bruteforce(3, 3, sym_oc)
    for v, _ in oracle.support:
        expected = Fraction(sum(c for w, c in oracle.support if w <= v), 20)
        assert p_value(nd, v) == expected
    # between support points the CDF stays flat
    v0, v1 = nd.support[0][0], nd.support[1][0]
    assert p_value(nd, (v0 + v1) / 2) == p_value(nd, v0)


@pytest.mark.parametrize("oc", OC_GRID)
def test_p_value_monotone(oc):
    nd = null_distribution(6, 5, oc)
    ps = [p_value(nd, v) for v, _ in nd.support]
    assert all(p > 0 for p in ps)
    assert ps == sorted(ps)
    assert ps[-1] == 1
    assert p_value(nd, 10) == 1


def test_support_strictly_increasing(cost2_oc):
    nd = null_distribution(8, 6, cost2_oc)
    values = nd.values
    assert all(a < b for a, b in zip(values, values[1:]))
    assert sum(c for _, c in nd.support) == sum(nd.cells.values()) == math.comb(14, 6)


# -- persistence ------------------------------------------------------------


def test_round_trip(tmp_path, cost2_oc):
    nd = null_distribution(9, 9, cost2_oc)
    path = tmp_path / "nd.txt"
    save_nd(nd, path)
    assert load_nd(path) == nd
    save_nd(load_nd(path), tmp_path / "again.txt")
    assert (tmp_path / "again.txt").read_bytes() == path.read_bytes()


def test_file_layout(cost2_oc):
    text = dumps_nd(null_distribution(2, 2, cost2_oc))
    lines = text.splitlines()
    assert lines[:6] == ["#ETC-ND v1", "n0=2", "n1=2", "c0=1/1", "c1=2/1", "pi1=1/2"]
    assert lines[-1] == "total 6"
    assert text.endswith("\n") and "\r" not in text


def test_checksum_mismatch(cost2_oc):
    text = dumps_nd(null_distribution(3, 3, cost2_oc)).replace("total 20", "total 21")
    with pytest.raises(ChecksumMismatch):
        loads_nd(text)


def test_tampered_cell(cost2_oc):
    text = dumps_nd(null_distribution(3, 3, cost2_oc))
    lines = text.splitlines()
    i = next(i for i, line in enumerate(lines) if line.startswith("cell") and not line.endswith(" 0"))
    kind, fn, fp, count = lines[i].split()
    lines[i] = f"{kind} {fn} {fp} {int(count) + 1}"
    with pytest.raises(ChecksumMismatch):
        loads_nd("\n".join(lines))


def test_bad_header():
    with pytest.raises(FormatVersionMismatch):
        loads_nd("#ETC-ND v2\nn0=1\n")


def test_cache_hit_skips_computation(tmp_path, cost2_oc):
    first = NDCache(tmp_path)
    nd = first.get(6, 6, cost2_oc)
    assert first.computed == 1
    second = NDCache(tmp_path)
    assert second.get(6, 6, cost2_oc) == nd
    assert second.computed == 0
    assert len(list(tmp_path.iterdir())) == 1


def test_cache_env_default(tmp_path, monkeypatch, sym_oc):
    monkeypatch.setenv("ETC_CACHE_DIR", str(tmp_path))
    NDCache().get(3, 3, sym_oc)
    assert len(list(tmp_path.iterdir())) == 1


def test_csv_export(tmp_path, cost2_oc):
    nd = null_distribution(9, 9, cost2_oc)
    path = tmp_path / "nd.csv"
    write_nd_csv(nd, path)
    rows = [line.split(",") for line in path.read_text().splitlines()]
    assert rows[0] == ["value", "exact_value", "probability", "cumulative"]
    assert rows[1][1] == "0/1"
    assert float(rows[1][2]) == pytest.approx(2 / 48620, rel=1e-15)
    assert float(rows[-1][3]) == 1.0
    assert sum(Fraction(r[1]) == v for r, (v, _) in zip(rows[1:], nd.support)) == len(nd.support)
