import json
import math
from fractions import Fraction

import numpy as np
import pytest

from etctest.errors import LabelMismatch, NdMismatch, ParseError, SingleClassLabels, ValueOutOfRange
from etctest.estimator import LabeledSample, OperatingCondition, etc_hat_conservative
from etctest.filter import (
    REPORT_COLUMNS,
    FilterReport,
    VariableMatrix,
    bh_adjust,
    load_matrix,
    rank_variables,
    read_report,
    write_report,
)
from etctest.nulldist import NDCache, null_distribution, p_value
from etctest.permutation import nulldist_bruteforce

WIDE = """label,a,b,c
0,1.0,5,0.3
0,2.0,5,0.1
0,3.0,5,0.9
1,4.0,5,0.2
1,5.0,5,0.8
1,6.0,5,0.4
"""


@pytest.fixture
def wide(tmp_path):
    path = tmp_path / "wide.csv"
    path.write_text(WIDE)
    return path


# -- loading ----------------------------------------------------------------


def test_load_wide(wide):
    m = load_matrix(wide)
    assert m.names == ["a", "b", "c"]
    assert (m.n0, m.n1) == (3, 3)
    assert m.data.shape == (6, 3)


def test_load_long(tmp_path):
    values = tmp_path / "long.csv"
    labels = tmp_path / "labels.csv"
    values.write_text("variable,sample_id,value\nx,s1,1\nx,s2,2\ny,s2,7\ny,s1,8\n")
    labels.write_text("sample_id,label\ns1,0\ns2,1\n")
    m = load_matrix(values, "csv-long", label_path=labels)
    assert m.names == ["x", "y"]
    np.testing.assert_array_equal(m.data, [[1, 8], [2, 7]])
    np.testing.assert_array_equal(m.labels, [0, 1])


def test_parse_error_location(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("label,a,b\n0,1,2\n1,3,oops\n")
    with pytest.raises(ParseError) as info:
        load_matrix(path)
    assert (info.value.row, info.value.col) == (3, "b")


def test_single_class_labels(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("label,a\n0,1\n0,2\n")
    with pytest.raises(SingleClassLabels):
        load_matrix(path)


def test_missing_label_column(wide):
    with pytest.raises(LabelMismatch):
        load_matrix(wide, label_column="y")


def test_duplicate_names_rejected():
    with pytest.raises(ValueError):
        VariableMatrix(["a", "a"], np.zeros((2, 2)), [0, 1])


# -- ranking ----------------------------------------------------------------


def test_extremes(wide, sym_oc):
    report = rank_variables(load_matrix(wide), sym_oc, null_distribution(3, 3, sym_oc))
    top, *_ = report.records
    assert top.name == "a" and top.rank == 1
    assert top.statistic == 0 and top.p == Fraction(2, math.comb(6, 3))
    const = next(r for r in report.records if r.name == "b")
    assert const.statistic == sym_oc.max_value
    assert const.p == 1
    assert [r.rank for r in report.records] == [1, 2, 3]


def test_identical_statistics_keep_input_order(sym_oc):
    x = np.array([1.0, 2, 3, 4])
    m = VariableMatrix(["z", "y"], np.column_stack([x, x + 10]), [0, 1, 0, 1])
    report = rank_variables(m, sym_oc, null_distribution(2, 2, sym_oc))
    assert report.names == ["z", "y"]
    assert report.records[0].p == report.records[1].p


def test_ranking_matches_bruteforce_p(sym_oc):
    rng = np.random.default_rng(11)
    data = rng.normal(size=(10, 10))
    labels = np.array([0, 1] * 5)
    m = VariableMatrix([f"v{j}" for j in range(10)], data, labels)
    oracle = nulldist_bruteforce(5, 5, sym_oc)
    report = rank_variables(m, sym_oc, null_distribution(5, 5, sym_oc))
    expected = []
    for j in range(10):
        est = etc_hat_conservative(LabeledSample(data[:, j], labels), sym_oc)
        expected.append((p_value(oracle, est.value), est.value, j))
    assert report.names == [f"v{j}" for _, _, j in sorted(expected)]
    assert [r.p for r in report.records] == sorted(p for p, _, _ in expected)


def test_rank_equals_statistic_order(cost2_oc):
    rng = np.random.default_rng(5)
    m = VariableMatrix([f"v{j}" for j in range(200)], rng.normal(size=(14, 200)), [0] * 7 + [1] * 7)
    report = rank_variables(m, cost2_oc, NDCache())
    stats = [r.statistic for r in report.records]
    assert stats == sorted(stats)
    assert all(r.p_adjusted >= r.p for r in report.records)


def test_nd_mismatch(wide, sym_oc):
    with pytest.raises(NdMismatch):
        rank_variables(load_matrix(wide), sym_oc, null_distribution(4, 2, sym_oc))


def test_missing_values_are_skipped(tmp_path, sym_oc):
    path = tmp_path / "na.csv"
    path.write_text("label,a,b\n0,1,NA\n0,2,1\n1,3,2\n1,4,3\n")
    report = rank_variables(load_matrix(path), sym_oc, NDCache())
    assert report.names == ["a"]
    assert report.rejected == [("b", "missing values")]


def test_no_adjustment(wide, sym_oc):
    report = rank_variables(load_matrix(wide), sym_oc, NDCache(), adjust="none")
    assert all(r.p_adjusted == r.p for r in report.records)


# -- Benjamini-Hochberg -----------------------------------------------------


@pytest.mark.parametrize(
    "p, q",
    [
        (["0.04"], ["0.04"]),
        (["0.01", "0.02", "0.04"], ["0.03", "0.03", "0.04"]),
        ([1, 1, 1], [1, 1, 1]),
        (["0.04", "0.01", "0.02"], ["0.04", "0.03", "0.03"]),
    ],
)
def test_bh(p, q):
    assert bh_adjust(p) == [Fraction(v) for v in q]


def test_bh_against_direct_formula():
    rng = np.random.default_rng(0)
    p = [Fraction(int(k), 1000) for k in rng.integers(0, 1001, 25)]
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    for rank, i in enumerate(order, start=1):
        direct = min(min(p[order[j - 1]] * m / j for j in range(rank, m + 1)), 1)
        assert bh_adjust(p)[i] == direct


def test_bh_range_check():
    with pytest.raises(ValueOutOfRange):
        bh_adjust([Fraction(3, 2)])


# -- reports ----------------------------------------------------------------


def test_report_round_trip(tmp_path, wide, sym_oc):
    report = rank_variables(load_matrix(wide), sym_oc, NDCache())
    path = tmp_path / "r.csv"
    write_report(report, path)
    rows = read_report(path)
    assert [r["rank"] for r in rows] == [1, 2, 3]
    assert [r["p_exact"] for r in rows] == [rec.p for rec in report.records]
    assert list(rows[0]) == REPORT_COLUMNS


def test_report_jsonl(tmp_path, wide, sym_oc):
    report = rank_variables(load_matrix(wide), sym_oc, NDCache())
    path = tmp_path / "r.jsonl"
    write_report(report, path, format="jsonl", top=2)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["name"] for r in rows] == report.names[:2]
    assert rows[0]["p_exact"] == "1/10"


def test_empty_report(tmp_path, sym_oc):
    path = tmp_path / "empty.csv"
    write_report(FilterReport([], 3, 3, sym_oc, "key"), path)
    assert path.read_text() == ",".join(REPORT_COLUMNS) + "\n"


def test_report_is_deterministic(tmp_path, cost2_oc):
    rng = np.random.default_rng(9)
    m = VariableMatrix([f"v{j}" for j in range(50)], rng.normal(size=(10, 50)).round(1), [0, 1] * 5)
    for name in ("a.csv", "b.csv"):
        write_report(rank_variables(m, cost2_oc, NDCache()), tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_null_p_values_are_sub_uniform():
    oc = OperatingCondition(1, 2, "1/2")
    rng = np.random.default_rng(21)
    m = VariableMatrix([f"v{j}" for j in range(4000)], rng.normal(size=(16, 4000)), [0, 1] * 8)
    ps = [float(r.p) for r in rank_variables(m, oc, NDCache()).records]
    for alpha in (0.01, 0.05, 0.1):
        rate = np.mean(np.array(ps) <= alpha)
        assert rate <= alpha + 3 * math.sqrt(alpha * (1 - alpha) / len(ps))
