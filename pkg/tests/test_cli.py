import csv
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from etctest.cli import main
from etctest.filter import bh_adjust, read_report


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def toy(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("x,label\n0.1,0\n0.5,0\n0.3,0\n1.2,1\n0.9,1\n1.7,1\n")
    return path


def test_test_separable(capsys, toy, tmp_path):
    code, out, _ = run(capsys, "test", "--data", toy, "--labels", "label", "--cache-dir", tmp_path / "cache")
    assert code == 0
    rec = json.loads(out)
    assert rec["statistic_exact"] == "0/1"
    assert rec["p_exact"] == "1/10" and float(rec["p"]) == 0.1
    assert rec["direction"] == "at-or-above" and rec["threshold"] == 0.9


def test_test_constant_variable(capsys, tmp_path):
    path = tmp_path / "const.csv"
    path.write_text("x,label\n" + "".join(f"2.0,{y}\n" for y in (0, 1, 0, 1)))
    code, out, _ = run(capsys, "test", "--data", path, "--labels", "label", "--c1", "2")
    rec = json.loads(out)
    assert code == 0
    assert Fraction(rec["statistic_exact"]) == Fraction(1, 2)
    assert rec["p_exact"] == "1/1" and rec["tie_adjusted"]


def test_test_label_file(capsys, tmp_path):
    data = tmp_path / "x.csv"
    labels = tmp_path / "y.csv"
    data.write_text("x\n1\n2\n3\n4\n")
    labels.write_text("label\n0\n0\n1\n1\n")
    code, out, _ = run(capsys, "test", "--data", data, "--labels", labels)
    assert code == 0 and json.loads(out)["p_exact"] == "1/3"


def test_missing_labels_flag(capsys, toy):
    code, _, err = run(capsys, "test", "--data", toy)
    assert code == 2 and "usage" in err


def test_degenerate_oc(capsys, toy):
    code, _, err = run(capsys, "test", "--data", toy, "--labels", "label", "--pi1", "0")
    assert code == 3 and "error" in err


def test_bad_oc_string(capsys, toy):
    code, _, _ = run(capsys, "test", "--data", toy, "--labels", "label", "--c0", "abc")
    assert code == 2


def test_unknown_subcommand(capsys):
    assert run(capsys, "frobnicate")[0] == 2


def test_nulldist(capsys, tmp_path):
    out = tmp_path / "nd.csv"
    code, stdout, _ = run(capsys, "nulldist", "--n0", 9, "--n1", 9, "--c0", 1, "--c1", 2, "--pi1", "0.5", "--out", out)
    assert code == 0
    assert json.loads(stdout)["p_at_zero"] == "1/24310"  # 2/48620
    rows = list(csv.DictReader(out.open()))
    assert rows[0]["exact_value"] == "0/1"
    assert sum(Fraction(r["probability"]) for r in rows) == pytest.approx(1, abs=1e-12)
    assert (tmp_path / "nd.csv.nd").exists()
    first = out.read_bytes()
    run(capsys, "nulldist", "--n0", 9, "--n1", 9, "--c0", 1, "--c1", 2, "--pi1", "0.5", "--out", out)
    assert out.read_bytes() == first


def test_nulldist_matches_oracle(capsys, tmp_path, sym_oc):
    from etctest.nulldist import write_nd_csv
    from etctest.permutation import nulldist_bruteforce

    out, ref = tmp_path / "nd.csv", tmp_path / "ref.csv"
    run(capsys, "nulldist", "--n0", 3, "--n1", 3, "--out", out)
    write_nd_csv(nulldist_bruteforce(3, 3, sym_oc), ref)
    assert out.read_bytes() == ref.read_bytes()


def test_nulldist_degenerate(capsys, tmp_path):
    code, _, _ = run(capsys, "nulldist", "--n0", 3, "--n1", 3, "--c0", 0, "--out", tmp_path / "x.csv")
    assert code == 3


def test_nulldist_uses_cache_dir(capsys, tmp_path):
    cache = tmp_path / "cache"
    run(capsys, "nulldist", "--n0", 4, "--n1", 3, "--out", tmp_path / "nd.csv", "--cache-dir", cache)
    assert len(list(cache.iterdir())) == 1
    assert not (tmp_path / "nd.csv.nd").exists()


@pytest.fixture
def matrix(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text(
        "label,noisy,perfect,flat,other,more\n"
        "0,0.3,1,5,2,0.1\n0,0.1,2,5,1,0.7\n0,0.9,3,5,3,0.2\n"
        "1,0.2,4,5,0,0.5\n1,0.8,5,5,5,0.4\n1,0.4,6,5,4,0.3\n"
    )
    return path


def test_filter(capsys, matrix, tmp_path):
    out = tmp_path / "report.csv"
    code, stdout, _ = run(capsys, "filter", "--data", matrix, "--out", out)
    assert code == 0
    assert json.loads(stdout)["variables_tested"] == 5
    rows = read_report(out)
    assert rows[0]["name"] == "perfect"
    assert [r["p_bh_exact"] for r in rows] == bh_adjust([r["p_exact"] for r in rows])


def test_filter_top(capsys, matrix, tmp_path):
    out = tmp_path / "top.csv"
    run(capsys, "filter", "--data", matrix, "--out", out, "--top", 2)
    assert len(out.read_text().splitlines()) == 3


def test_filter_jsonl_no_adjust(capsys, matrix, tmp_path):
    out = tmp_path / "r.jsonl"
    code, stdout, _ = run(capsys, "filter", "--data", matrix, "--out", out, "--format", "jsonl", "--adjust", "none")
    assert code == 0 and json.loads(stdout)["p_bh_le_0.05"] is None
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert rows[0]["p_bh"] == ""


def test_filter_parse_error(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("label,a\n0,1\n1,x\n")
    code, _, err = run(capsys, "filter", "--data", path, "--out", tmp_path / "r.csv")
    assert code == 2 and "row 3" in err


def test_simulate_deterministic(capsys, tmp_path):
    args = ["simulate", "--study", "A", "--seed", 7, "--signal", 10, "--noise", 90, "--n0", 8, "--n1", 8,
            "--replications", 2, "--deltas", "0,1.5"]
    run(capsys, *args, "--out", tmp_path / "a")
    run(capsys, *args, "--out", tmp_path / "b")
    a, b = (tmp_path / d / "study_A.csv" for d in "ab")
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(a.open()))
    assert len(rows) == 6


def test_simulate_study_c_columns(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--study", "C", "--signal", 10, "--noise", 90, "--n0", 10, "--n1", 10,
                     "--replications", 2, "--deltas", "1", "--second-grid", "0,0.2", "--out", tmp_path)
    assert code == 0
    header = (tmp_path / "study_C.csv").read_text().splitlines()[0].split(",")
    assert "fp_mean" in header and "delta_fp_mean" in header


def test_simulate_invalid_grid(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--study", "C", "--second-grid", "0.1,0.2", "--out", tmp_path)
    assert code == 2


def test_bench(capsys, tmp_path):
    out = tmp_path / "bench.csv"
    code, _, _ = run(capsys, "bench", "--n-min", 3, "--n-max", 5, "--out", out)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert [(r["n0"], r["memo"]) for r in rows[:2]] == [("3", "on"), ("3", "off")]
    assert len(rows) == 6
    code, _, _ = run(capsys, "bench", "--n-min", 3, "--n-max", 4, "--memo", "on", "--out", out)
    assert len(list(csv.DictReader(out.open()))) == 2


def test_module_entry_point(tmp_path, toy):
    proc = subprocess.run(
        [sys.executable, "-m", "etctest", "test", "--data", str(toy), "--labels", "label"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["p_exact"] == "1/10"
