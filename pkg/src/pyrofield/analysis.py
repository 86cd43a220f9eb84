"""Diagnostics for the long-run behaviour of Z_n and sweeps over parameters.

The within-path Cauchy fraction ``P{|Z_2m - Z_m| > eps}`` is estimated on each
simulated path, so a random (path-dependent) limit is not penalised; only
fluctuations along a single path count against convergence. These are
descriptive numbers, not a test of whether the limit exists.
"""

from __future__ import annotations

import csv
import io
import os
import struct
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .mc import SimConfig, TraceBatch, simulate
from .model import Params

DEFAULT_EPSILONS = (0.1, 0.05, 0.02, 0.01)
DEFAULT_CHECKPOINTS = (250, 500, 1000, 2000)
SWEEP_COLUMNS = ("alpha", "beta", "gamma", "checkpoint", "mean_z", "var_z",
                 "extinct_frac", "replicas", "seed")


def doubling_checkpoints(base: int, levels: int) -> list[int]:
    if base < 1 or levels < 1:
        raise ValidationError("checkpoint base and levels must be >= 1")
    return [base << i for i in range(levels)]


@dataclass
class ConvergenceReport:
    checkpoints: list
    epsilons: list
    replicas: int
    per_checkpoint: list
    cauchy: list
    flags: list = field(default_factory=list)

    def fractions(self, eps: float) -> list[float]:
        key = _eps_key(eps)
        return [row["fractions"][key] for row in self.cauchy]

    def to_dict(self) -> dict:
        return asdict(self)


def _eps_key(eps: float) -> str:
    return repr(float(eps))


def convergence_diagnostics(batch: TraceBatch, checkpoints: Sequence[int],
                            epsilons: Sequence[float] = DEFAULT_EPSILONS) -> ConvergenceReport:
    checkpoints = [int(c) for c in checkpoints]
    if not checkpoints or any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValidationError("checkpoints must be a nonempty strictly increasing list")
    if any(e <= 0 for e in epsilons):
        raise ValidationError("epsilons must be positive")
    cols = []
    for c in checkpoints:
        if c > batch.ns[-1]:
            raise ValidationError(f"checkpoint {c} is beyond the traces (last diagonal {batch.ns[-1]})")
        cols.append(batch.column(c))
    z = batch.z[:, cols]
    ddof = 1 if z.shape[0] > 1 else 0
    qs = np.percentile(z, [5, 25, 50, 75, 95], axis=0)
    per = [
        {
            "n": c,
            "mean_z": float(z[:, i].mean()),
            "var_z": float(z[:, i].var(ddof=ddof)),
            "quantiles": [float(q) for q in qs[:, i]],
            "extinct_frac": batch.extinct_fraction(c),
        }
        for i, c in enumerate(checkpoints)
    ]
    cauchy = []
    for i in range(len(checkpoints) - 1):
        diff = np.abs(z[:, i + 1] - z[:, i])
        cauchy.append({
            "m": checkpoints[i],
            "m_next": checkpoints[i + 1],
            "fractions": {_eps_key(e): float(np.mean(diff > e)) for e in epsilons},
        })
    flags = []
    for e in epsilons:
        key = _eps_key(e)
        seq = [row["fractions"][key] for row in cauchy]
        if any(b > a for a, b in zip(seq, seq[1:])):
            flags.append(f"cauchy fraction for eps={key} increases along the checkpoints")
    return ConvergenceReport(checkpoints, [float(e) for e in epsilons], int(batch.y.shape[0]),
                             per, cauchy, flags)


def run_convergence(config: SimConfig, checkpoints: Sequence[int] = DEFAULT_CHECKPOINTS,
                    epsilons: Sequence[float] = DEFAULT_EPSILONS,
                    threads: Optional[int] = None) -> ConvergenceReport:
    config = replace(config, n_max=max(checkpoints))
    batch = simulate(config, threads, record_ns=checkpoints)
    return convergence_diagnostics(batch, checkpoints, epsilons)


def valid_grid(resolution: int) -> list[Params]:
    """Valid triples on the grid ``{0, 1/(r-1), ..., 1}^3`` in lexicographic order.

    Filtering is done on the integer grid indices so that no triple is kept or
    dropped because of rounding in ``a + b``. On the face ``gamma = alpha + beta``
    gamma is taken as the rounded sum when that is below ``c / d`` (one ulp at
    most), so every emitted triple also passes the exact float check.
    """
    if resolution < 2:
        raise ValidationError("resolution must be >= 2")
    d = resolution - 1
    out = []
    for a in range(resolution):
        for b in range(resolution):
            for c in range(resolution):
                if a <= c and b <= c and c <= a + b:
                    gamma = c / d
                    if c == a + b:
                        gamma = min(gamma, a / d + b / d)
                    out.append(Params(a / d, b / d, gamma))
    return out


def cell_seed(master_seed: int, params: Params) -> int:
    """Seed of one sweep cell, fixed by the master seed and the cell's parameters."""
    bits = [struct.unpack("<Q", struct.pack("<d", v))[0]
            for v in (params.alpha, params.beta, params.gamma)]
    ss = np.random.SeedSequence(master_seed, spawn_key=bits)
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class SweepCell:
    alpha: float
    beta: float
    gamma: float
    checkpoint: int
    mean_z: float
    var_z: float
    extinct_frac: float
    replicas: int
    seed: int

    @property
    def params(self) -> Params:
        return Params(self.alpha, self.beta, self.gamma)

    def row(self) -> list[str]:
        return [repr(self.alpha), repr(self.beta), repr(self.gamma), str(self.checkpoint),
                repr(self.mean_z), repr(self.var_z), repr(self.extinct_frac),
                str(self.replicas), str(self.seed)]

    @classmethod
    def from_row(cls, row: dict) -> SweepCell:
        return cls(float(row["alpha"]), float(row["beta"]), float(row["gamma"]),
                   int(row["checkpoint"]), float(row["mean_z"]), float(row["var_z"]),
                   float(row["extinct_frac"]), int(row["replicas"]), int(row["seed"]))


@dataclass
class SweepResult:
    cells: list
    errors: list = field(default_factory=list)

    def cell(self, alpha: float, beta: float, gamma: float) -> SweepCell:
        for c in self.cells:
            if (c.alpha, c.beta, c.gamma) == (alpha, beta, gamma):
                return c
        raise KeyError((alpha, beta, gamma))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for c in self.cells:
            w.writerow(c.row())
        return buf.getvalue()


def _load_completed(path: str) -> dict:
    done = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                cell = SweepCell.from_row(row)
            except (KeyError, ValueError, TypeError):
                continue  # partial trailing line from an interrupted write
            done[(cell.alpha, cell.beta, cell.gamma)] = cell
    return done


def _write_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def run_one_cell(params: Params, template: SimConfig, checkpoint: int,
                 threads: Optional[int] = None) -> SweepCell:
    seed = cell_seed(template.master_seed, params)
    config = replace(template, params=params, master_seed=seed)
    batch = simulate(config, threads, record_ns=[checkpoint])
    z = batch.z[:, 0]
    return SweepCell(params.alpha, params.beta, params.gamma, checkpoint,
                     float(z.mean()), float(z.var(ddof=1)) if z.size > 1 else 0.0,
                     batch.extinct_fraction(checkpoint), config.replicas, seed)


def run_sweep(grid: Sequence[Params], template: SimConfig, checkpoint: Optional[int] = None,
              out: Optional[str] = None, resume: bool = False,
              threads: Optional[int] = None) -> SweepResult:
    """Simulate every grid cell; with ``out`` each finished cell is appended to
    the CSV at once, and ``resume`` skips cells already present there. The
    file is rewritten in grid order when the sweep finishes."""
    if checkpoint is None:
        checkpoint = template.n_max
    if not 0 <= checkpoint <= template.n_max:
        raise ValidationError(f"checkpoint {checkpoint} must lie in 0..n_max={template.n_max}")
    done = {}
    if out is not None and resume and os.path.exists(out):
        done = _load_completed(out)
        # drop any torn trailing line so later appends start on a fresh row
        _write_atomic(out, SweepResult(list(done.values())).to_csv())
    elif out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(",".join(SWEEP_COLUMNS) + "\n")
    result = SweepResult([])
    for params in grid:
        key = (params.alpha, params.beta, params.gamma)
        prior = done.get(key)
        if (prior is not None and prior.checkpoint == checkpoint
                and prior.replicas == template.replicas
                and prior.seed == cell_seed(template.master_seed, params)):
            result.cells.append(prior)
            continue
        cell = run_one_cell(params, template, checkpoint, threads)
        result.cells.append(cell)
        if out is not None:
            try:
                with open(out, "a", newline="") as fh:
                    csv.writer(fh, lineterminator="\n").writerow(cell.row())
            except OSError as exc:
                result.errors.append(f"cell {key}: {exc}")
    if out is not None:
        _write_atomic(out, result.to_csv())
    return result


def monotone_line(line: Sequence[Params], template: SimConfig, checkpoint: Optional[int] = None,
                  threads: Optional[int] = None) -> list[float]:
    """Mean Z at ``checkpoint`` along componentwise increasing parameters, all
    run on the template's seed so the fields are coupled site by site."""
    for lo, hi in zip(line, line[1:]):
        if not lo.dominated_by(hi):
            raise ValidationError(f"{lo} is not below {hi}")
    if checkpoint is None:
        checkpoint = template.n_max
    means = []
    for params in line:
        batch = simulate(replace(template, params=params), threads, record_ns=[checkpoint])
        means.append(float(batch.z[:, 0].mean()))
    return means
