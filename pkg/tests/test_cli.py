import json
import subprocess
import sys

import pytest

from gnevolt.cli import main
from gnevolt.scenario import bundled_document
from gnevolt.trace import CSV_COLUMNS, read_csv


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_list(capsys):
    assert main(["list"]) == 0
    assert "ieee13" in capsys.readouterr().out.split()


def test_run_with_reference(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    assert main(["run", "chain2", "--reference", "--trace", str(trace)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["converged"] and rep["dist_to_ref"] <= 1e-8
    assert rep["ratio"] == pytest.approx(1.0, abs=1e-8)
    assert rep["reference_unique"] is True
    assert rep["audit"]["violations"] == 0
    rows = read_csv(trace)
    assert list(rows[0]) == list(CSV_COLUMNS)
    assert int(rows[-1]["t"]) == rep["iterations"]


def test_run_report_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["run", "toy1", "--algorithm", "eg", "--report", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(out.read_text())["algorithm"] == "eg"


def test_exit_schema(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    d = bundled_document("chain2")
    d["partition"] = [[1, 2], [2]]
    assert main(["run", write(tmp_path, d)]) == 2
    assert "bus 2 listed twice" in capsys.readouterr().err


def test_exit_diverged(tmp_path, capsys):
    d = bundled_document("ieee13")
    d["tunings"] = {}
    d["solver"] = {"algorithm": "admm_compact", "rho": 10.0, "beta": 1e-3, "stop": "none",
                   "max_iter": 2000}
    assert main(["run", write(tmp_path, d)]) == 3
    assert "diverged" in capsys.readouterr().err


def test_exit_nonunique(tmp_path, capsys):
    d = bundled_document("chain2")
    d["gamma"], d["costs"] = 0.0, {"type": "quadratic", "c": 0.0}
    assert main(["run", write(tmp_path, d), "--reference", "--max-iter", "5"]) == 4
    assert "--allow-multiple" in capsys.readouterr().err
    assert main(["run", write(tmp_path, d), "--reference", "--allow-multiple",
                 "--max-iter", "5"]) == 0


def test_unknown_algorithm(capsys):
    assert main(["run", "chain2", "--algorithm", "newton"]) == 1


def test_check_params_deterministic(capsys):
    assert main(["check-params", "chain2"]) == 0
    first = capsys.readouterr().out
    assert main(["check-params", "chain2"]) == 0
    assert capsys.readouterr().out == first
    assert "rho_max" in first and "admissible" in first


def test_check_params_subprocess_identical():
    cmd = [sys.executable, "-m", "gnevolt.cli", "check-params", "ieee13"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and b"strong_monotonicity" in a


def test_compare_toy(tmp_path, capsys):
    out = tmp_path / "c.json"
    assert main(["compare", "toy1", "--costs", "0.5", "--algorithms", "admm,eg",
                 "--json", str(out)]) == 0
    table = capsys.readouterr().out.splitlines()
    assert table[0].split() == ["c_j", "admm", "eg"]
    cells = json.loads(out.read_text())
    assert all(c["iterations"] is not None and c["iterations"] < 100 for c in cells)


def test_async_sweep(tmp_path, capsys):
    assert main(["async-sweep", "chain2_split", "--delays", "1,3", "--trace-dir",
                 str(tmp_path), "--record-every", "50"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert [s["T"] for s in summary] == [1, 3]
    assert all(s["violations"] == 0 for s in summary)
    assert (tmp_path / "trace_T3.csv").exists()


def test_tune(capsys):
    assert main(["tune", "toy1", "--algorithm", "admm", "--grid", "rho=0.5,1;beta_factor=1"]) == 0
    best = json.loads(capsys.readouterr().out)["best"]
    assert best["source"] == "grid search" and best["rho"] in (0.5, 1.0)
