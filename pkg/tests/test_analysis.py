import csv
import itertools
import json
from fractions import Fraction

import jsonschema
import numpy as np
import pytest

from pyrofield.analysis import (SWEEP_COLUMNS, cell_seed, convergence_diagnostics,
                                doubling_checkpoints, monotone_line, run_convergence, run_sweep,
                                valid_grid)
from pyrofield.errors import ValidationError
from pyrofield.exact import exact_ez
from pyrofield.mc import SimConfig, simulate
from pyrofield.model import Boundary, Params
from pyrofield.schemas import CONVERGENCE_SCHEMA

DELTA = Boundary.delta()


def brute_grid(resolution):
    d = resolution - 1
    pts = [Fraction(i, d) for i in range(resolution)]
    return [(a, b, c) for a, b, c in itertools.product(pts, repeat=3)
            if a <= c and b <= c and c <= 1 and c <= a + b]


def test_grid_resolution_2_is_the_corners():
    got = [(p.alpha, p.beta, p.gamma) for p in valid_grid(2)]
    assert got == [(0.0, 0.0, 0.0), (0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, 1.0)]


@pytest.mark.parametrize("resolution", [3, 5, 11, 21, 37])
def test_grid_matches_rational_enumeration(resolution):
    grid = valid_grid(resolution)
    ref = brute_grid(resolution)
    assert len(grid) == len(ref)
    for p, (a, b, c) in zip(grid, ref):
        assert (p.alpha, p.beta) == (float(a), float(b))
        assert abs(p.gamma - float(c)) <= np.spacing(1.0)


def test_grid_count_resolution_11():
    assert len(valid_grid(11)) == 286


def test_grid_rejects_tiny_resolution():
    with pytest.raises(ValidationError):
        valid_grid(1)


def test_cell_seed_depends_on_parameters_only_through_bits():
    a = Params(0.5, 0.5, 0.75)
    assert cell_seed(1, a) == cell_seed(1, Params(0.5, 0.5, 0.75))
    assert cell_seed(1, a) != cell_seed(2, a)
    assert cell_seed(1, a) != cell_seed(1, Params(0.5, 0.5, 0.8))


def test_doubling_checkpoints():
    assert doubling_checkpoints(250, 4) == [250, 500, 1000, 2000]
    with pytest.raises(ValidationError):
        doubling_checkpoints(0, 3)


def test_convergence_on_trivial_fields():
    for params, z in ((Params(1, 1, 1), 1.0), (Params(0, 0, 0), 0.0)):
        report = run_convergence(SimConfig(params, DELTA, 1, 50, 1), [10, 20, 40])
        assert [row["mean_z"] for row in report.per_checkpoint] == [z] * 3
        assert all(v == 0.0 for row in report.cauchy for v in row["fractions"].values())
        assert report.flags == []


def test_convergence_report_shape_and_schema():
    report = run_convergence(SimConfig(Params(0.7, 0.7, 0.9), DELTA, 1, 300, 4),
                             [25, 50, 100], [0.1, 0.01])
    assert [(r["m"], r["m_next"]) for r in report.cauchy] == [(25, 50), (50, 100)]
    for eps in (0.1, 0.01):
        assert all(0 <= f <= 1 for f in report.fractions(eps))
    # a looser tolerance is never exceeded more often than a tighter one
    for row in report.cauchy:
        assert row["fractions"]["0.1"] <= row["fractions"]["0.01"]
    doc = {"params": {"alpha": 0.7, "beta": 0.7, "gamma": 0.9},
           "boundary": DELTA.to_dict(), "seed": 4, **report.to_dict()}
    jsonschema.validate(json.loads(json.dumps(doc)), CONVERGENCE_SCHEMA)


def test_convergence_fractions_by_hand():
    batch = simulate(SimConfig(Params(0.7, 0.7, 0.9), DELTA, 40, 100, 2, stop_on_extinction=False))
    report = convergence_diagnostics(batch, [10, 20, 40], [0.05])
    z = batch.z
    expected = np.mean(np.abs(z[:, 40] - z[:, 20]) > 0.05)
    assert report.cauchy[1]["fractions"]["0.05"] == expected


def test_convergence_checkpoint_errors():
    batch = simulate(SimConfig(Params(0.5, 0.5, 0.75), DELTA, 20, 5, 1))
    with pytest.raises(ValidationError):
        convergence_diagnostics(batch, [10, 40])
    with pytest.raises(ValidationError):
        convergence_diagnostics(batch, [10, 5])
    with pytest.raises(ValidationError):
        convergence_diagnostics(batch, [5, 10], [0.0])


def _template(replicas=200, n_max=30, seed=11):
    return SimConfig(Params(0, 0, 0), DELTA, n_max, replicas, seed)


def test_sweep_corner_cells():
    result = run_sweep(valid_grid(2), _template())
    assert result.cell(0.0, 0.0, 0.0).mean_z == 0.0
    assert result.cell(1.0, 1.0, 1.0).mean_z == 1.0
    assert result.cell(0.0, 1.0, 1.0).mean_z == pytest.approx(1 / 31)


def test_sweep_cell_agrees_with_exact():
    params = Params(0.5, 0.5, 0.75)
    N = 40_000
    result = run_sweep([params], _template(N, 10))
    cell = result.cells[0]
    truth = exact_ez(params, DELTA, 10)
    assert abs(cell.mean_z - truth) <= 3 * np.sqrt(cell.var_z / N)


def test_sweep_file_and_resume(tmp_path):
    out = tmp_path / "sweep.csv"
    grid = valid_grid(3)
    first = run_sweep(grid, _template(), out=str(out))
    text = out.read_text()
    rows = list(csv.DictReader(text.splitlines()))
    assert tuple(rows[0]) == SWEEP_COLUMNS and len(rows) == len(grid)
    assert text == first.to_csv()

    again = run_sweep(grid, _template(), out=str(out), resume=True)
    assert out.read_text() == text
    assert [c.mean_z for c in again.cells] == [c.mean_z for c in first.cells]


def test_interrupted_sweep_resumes_to_the_same_file(tmp_path):
    out = tmp_path / "sweep.csv"
    grid = valid_grid(3)
    full = run_sweep(grid, _template()).to_csv()
    lines = full.splitlines(keepends=True)
    # five finished cells followed by a torn line
    out.write_text("".join(lines[:6]) + lines[6][:7])
    run_sweep(grid, _template(), out=str(out), resume=True)
    assert out.read_text() == full


def test_resume_recomputes_cells_from_other_settings(tmp_path):
    out = tmp_path / "sweep.csv"
    grid = valid_grid(2)
    run_sweep(grid, _template(seed=1), out=str(out))
    fresh = run_sweep(grid, _template(seed=2)).to_csv()
    run_sweep(grid, _template(seed=2), out=str(out), resume=True)
    assert out.read_text() == fresh


def test_sweep_thread_invariance():
    grid = valid_grid(3)
    assert run_sweep(grid, _template(), threads=1).to_csv() == run_sweep(grid, _template(), threads=4).to_csv()


def test_sweep_checkpoint_validation():
    with pytest.raises(ValidationError):
        run_sweep(valid_grid(2), _template(n_max=10), checkpoint=11)


def test_monotone_line_is_nondecreasing():
    line = [Params(t, t, min(1.0, 1.3 * t)) for t in np.linspace(0.3, 0.75, 6)]
    means = monotone_line(line, SimConfig(line[0], DELTA, 150, 500, 3, stop_on_extinction=False))
    assert all(b >= a for a, b in zip(means, means[1:]))
    with pytest.raises(ValidationError):
        monotone_line(line[::-1], SimConfig(line[0], DELTA, 10, 5, 3))
