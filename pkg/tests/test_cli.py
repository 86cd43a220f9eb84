import csv
import io
import json
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

import jsonschema
import pytest

from pyrofield.cli import main
from pyrofield.schemas import CONVERGENCE_SCHEMA, EXACT_SCHEMA, ONED_SCHEMA, STATS_SCHEMA

DATA = Path(__file__).parent / "data"
SUBCOMMANDS = ["exact", "simulate", "sweep", "oned", "converge", "verify"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rational_pmf(n):
    """Law of Y_n for (1/2, 1/2, 3/4) and the delta boundary in exact rationals."""
    a, b, g = Fraction(1, 2), Fraction(1, 2), Fraction(3, 4)

    def kap(left, bottom):
        return g if left and bottom else a if left else b if bottom else Fraction(0)

    law = {(0,): 1 - g, (1,): g}
    for m in range(n):
        new = {}
        for prev, pp in law.items():
            probs = {(): pp}
            for j in range(m + 2):
                left = prev[j - 1] if j >= 1 else 0
                bottom = prev[j] if j <= m else 0
                k = kap(left, bottom)
                probs = {cfg + (e,): p * (k if e else 1 - k) for cfg, p in probs.items() for e in (0, 1)}
            for cfg, p in probs.items():
                new[cfg] = new.get(cfg, 0) + p
        law = new
    pmf = [Fraction(0)] * (n + 2)
    for cfg, p in law.items():
        pmf[sum(cfg)] += p
    return pmf


def test_exact_matches_frozen_golden(capsys, tmp_path):
    golden = json.loads((DATA / "exact_n6.json").read_text())
    pmf = rational_pmf(6)
    assert golden["ez"] == pytest.approx(float(sum(k * p for k, p in enumerate(pmf)) / 7), abs=1e-15)
    assert golden["pmf"] == pytest.approx([float(p) for p in pmf], abs=1e-15)

    out = tmp_path / "e.json"
    code, _, _ = run(capsys, "exact", "--n", "6", "--out", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, EXACT_SCHEMA)
    assert doc["pmf"] == pytest.approx(golden["pmf"], abs=1e-15)
    assert doc["ez"] == pytest.approx(golden["ez"], abs=1e-15)


def test_exact_csv_distribution(capsys, tmp_path):
    path = tmp_path / "d.csv"
    code, out, _ = run(capsys, "exact", "--n", "2", "--csv", str(path))
    assert code == 0
    rows = list(csv.DictReader(path.read_text().splitlines()))
    assert [int(r["config_index"]) for r in rows] == list(range(8))
    assert sum(float(r["probability"]) for r in rows) == pytest.approx(1.0, abs=1e-15)
    assert json.loads(out)["n"] == 2


def test_exact_limit_is_an_input_error(capsys):
    code, _, err = run(capsys, "exact", "--n", "13")
    assert code == 2 and err.startswith("ERROR exact_limit")


def test_constraint_violation_names_inequality(capsys):
    code, out, err = run(capsys, "simulate", "--gamma", "2", "--seed", "1")
    assert code == 2 and out == ""
    assert err.startswith("ERROR constraint_violation:")
    assert "gamma <= 1" in err
    assert err.count("\n") == 1


@pytest.mark.parametrize("argv", [
    ["simulate", "--bogus", "--seed", "1"],
    ["simulate", "--n-max", "10"],
    ["simulate", "--seed", "-3"],
    ["simulate", "--seed", "1", "--replicas", "0"],
    ["simulate", "--seed", "1", "--fire-x", "a,b"],
    ["nope"],
    ["oned", "--seed", "1"],
    ["oned", "--seed", "1", "--p", "1.5"],
    ["sweep", "--seed", "1", "--out", "x.csv", "--resolution", "1"],
    ["converge", "--seed", "1", "--checkpoints", "20,10"],
])
def test_invalid_input_exits_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err.startswith("ERROR ") and err.count("\n") == 1


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_lists_defaults(capsys, sub):
    with pytest.raises(SystemExit) as info:
        main([sub, "--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    assert "n_max_exact=12" in text and "n_max_enum=5" in text
    assert "0.1,0.05,0.02,0.01" in text and "250,500,1000,2000" in text
    if sub == "simulate":
        assert "(default: 1000)" in text and "(default: 0.75)" in text


def test_simulate_json_and_csv(capsys, tmp_path):
    code, out, err = run(capsys, "simulate", "--seed", "5", "--n-max", "20", "--replicas", "30")
    assert code == 0 and "INFO throughput:" in err
    doc = json.loads(out)
    jsonschema.validate(doc, STATS_SCHEMA)
    assert [row["n"] for row in doc["stats"]] == list(range(21))

    path = tmp_path / "t.csv"
    code, _, _ = run(capsys, "simulate", "--seed", "5", "--n-max", "20", "--replicas", "30",
                     "--record", "0:20:5", "--out", str(path))
    rows = list(csv.DictReader(path.read_text().splitlines()))
    assert list(rows[0]) == ["replica_id", "n", "y", "z"]
    assert len(rows) == 30 * 5
    assert {int(r["n"]) for r in rows} == {0, 5, 10, 15, 20}
    for r in rows:
        assert float(r["z"]) == int(r["y"]) / (int(r["n"]) + 1)


def test_simulate_output_independent_of_threads(capsys, tmp_path, monkeypatch):
    outs = []
    for t in ("1", "3"):
        monkeypatch.setenv("PYROFIELD_THREADS", t)
        path = tmp_path / f"t{t}.csv"
        assert run(capsys, "simulate", "--seed", "9", "--n-max", "50", "--replicas", "17",
                   "--alpha", "0.7", "--beta", "0.7", "--gamma", "0.9", "--out", str(path))[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_bad_thread_env_is_reported(capsys, monkeypatch):
    monkeypatch.setenv("PYROFIELD_THREADS", "zero")
    code, _, err = run(capsys, "simulate", "--seed", "1", "--n-max", "5", "--replicas", "2")
    assert code == 2 and err.startswith("ERROR ")


def test_oned_output(capsys):
    code, out, _ = run(capsys, "oned", "--p", "0.5", "--seed", "3", "--replicas", "20000", "--max-tail", "5")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, ONED_SCHEMA)
    assert doc["analytic"]["mean"] == 2.0
    assert abs(doc["z_scores"]["mean"]) < 4


def test_oned_divergent_is_rejected(capsys):
    code, _, err = run(capsys, "oned", "--p", "1", "--seed", "3")
    assert code == 2 and err.startswith("ERROR divergent_moments")


def test_converge_output(capsys):
    code, out, _ = run(capsys, "converge", "--seed", "2", "--replicas", "100",
                       "--checkpoints", "10,20,40", "--epsilons", "0.1,0.05")
    assert code == 0
    jsonschema.validate(json.loads(out), CONVERGENCE_SCHEMA)


def test_sweep_writes_and_resumes(capsys, tmp_path):
    path = tmp_path / "s.csv"
    argv = ["sweep", "--seed", "4", "--resolution", "3", "--n-max", "10", "--replicas", "20", "--out", str(path)]
    assert run(capsys, *argv)[0] == 0
    first = path.read_bytes()
    assert run(capsys, *argv, "--resume")[0] == 0
    assert path.read_bytes() == first


def test_unwritable_output_is_io_error(capsys, tmp_path):
    code, _, err = run(capsys, "exact", "--n", "1", "--out", str(tmp_path / "missing" / "x.json"))
    assert code == 1 and err.startswith("ERROR io:")


def test_verify_single_quick_check(capsys):
    code, out, _ = run(capsys, "verify", "--quick", "--only", "2")
    assert code == 0
    assert out.startswith("PASS") and out.count("\n") == 1


def test_console_script_runs():
    res = subprocess.run([sys.executable, "-m", "pyrofield.cli", "exact", "--n", "1"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["n"] == 1
