"""Acceptance checks shared by ``pyrofield verify`` and the test suite.

Each check returns a :class:`CheckResult`; statistical checks use 3-sigma
bands and fixed seeds, so their outcome is reproducible.
"""

from __future__ import annotations

import contextlib
import io
import json
import math
import os
import re
import tempfile
import time
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

import jsonschema
import numpy as np

from . import exact, mc, onedim
from .analysis import DEFAULT_CHECKPOINTS, DEFAULT_EPSILONS
from .model import Boundary, Params, random_params
from .schemas import CONVERGENCE_SCHEMA

EXACT_TOL = 1e-12
SIGMAS = 3.0
CHECK_SEED = 20240601

BOUNDARIES = (
    ("delta", Boundary.delta()),
    ("empty", Boundary.empty()),
    ("x{0,2}/y{0}", Boundary(frozenset({0, 2}), frozenset({0}))),
)

FULL = {
    "oracle_params": 20, "identity_params": 20, "column_k": 10, "column_replicas": 10**6,
    "oned_replicas": 10**6, "mc_params": 5, "mc_replicas": 10**5, "coupling_replicas": 10**4,
    "coupling_n": 200, "absorb_replicas": 2000, "throughput_replicas": 50,
    "throughput_n": 20000, "converge_replicas": 10**4,
}
QUICK = dict(FULL, column_replicas=10**5, oned_replicas=10**5, mc_replicas=2 * 10**4,
             coupling_replicas=500, absorb_replicas=300, throughput_replicas=2,
             throughput_n=5000, converge_replicas=300)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} [{self.number}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _rng(offset: int) -> np.random.Generator:
    return np.random.default_rng(CHECK_SEED + offset)


def check_oracle_equivalence(size: dict, threads=None) -> CheckResult:
    t0 = time.perf_counter()
    rng = _rng(1)
    worst = 0.0
    for _ in range(size["oracle_params"]):
        params = random_params(rng)
        for _, boundary in BOUNDARIES:
            joint = exact.triangle_enumeration(params, boundary, exact.N_MAX_ENUM)
            for dist in exact.forward(params, boundary, exact.N_MAX_ENUM):
                diff = np.abs(dist.probs - joint.diagonal_marginal(dist.n)).max()
                worst = max(worst, float(diff))
    elapsed = time.perf_counter() - t0
    ok = worst <= EXACT_TOL and elapsed < 60.0
    return CheckResult(1, "oracle equivalence", ok,
                       f"max |recursion - enumeration| = {worst:.2e} over n <= {exact.N_MAX_ENUM}, "
                       f"runtime {elapsed:.1f}s (< 60s)")


BETA_IDENTITY_LHS = {(2, 2): 1, (1, 2): 0, (1, 1): 1}
BETA_IDENTITY_RHS = {(1, 2): 0, (2, 1): 1, (1, 1): 1}


def check_beta_identity(size: dict, threads=None) -> CheckResult:
    rng = _rng(2)
    worst = 0.0
    for _ in range(size["identity_params"]):
        params = random_params(rng)
        lhs = exact.cylinder_probability(params, Boundary.delta(), BETA_IDENTITY_LHS)
        rhs = params.beta * exact.cylinder_probability(params, Boundary.delta(), BETA_IDENTITY_RHS)
        worst = max(worst, abs(lhs - rhs))
    return CheckResult(2, "beta factorisation identity", worst <= EXACT_TOL,
                       f"max |P(S22=1,S12=0,S11=1) - beta P(S12=0,S21=1,S11=1)| = {worst:.2e}")


def check_column_law(size: dict, threads=None) -> CheckResult:
    kmax = size["column_k"]
    rng = _rng(3)
    param_list = [Params(0.5, 0.5, 0.75)] + [random_params(rng) for _ in range(4)]
    worst = 0.0
    for params in param_list:
        for dist in exact.forward(params, Boundary.delta(), kmax):
            k = dist.n
            worst = max(worst, abs(dist.marginal(0) - params.gamma * params.beta ** k),
                        abs(dist.marginal(k) - params.gamma * params.alpha ** k))
    params = Params(0.6, 0.8, 0.9)  # distinct alpha, beta so a row/column mix-up shows
    N = size["column_replicas"]
    worst_z = 0.0
    for offset, window, rate in ((0, mc.SiteWindow(0, 0, 0, kmax), params.beta),
                                 (1, mc.SiteWindow(0, kmax, 0, 0), params.alpha)):
        config = mc.SimConfig(params, Boundary.delta(), kmax, N, CHECK_SEED + offset,
                              record_sites=window)
        freq = mc.burn_frequency(config, threads).reshape(-1)
        for k in range(kmax + 1):
            t = params.gamma * rate ** k
            worst_z = max(worst_z, abs(freq[k] - t) / math.sqrt(t * (1 - t) / N))
    ok = worst <= EXACT_TOL and worst_z <= SIGMAS
    return CheckResult(3, "column/row laws gamma*beta^k, gamma*alpha^k", ok,
                       f"exact max err {worst:.2e} (k <= {kmax}); MC max |z| {worst_z:.2f} "
                       f"at {N} replicas")


def check_oned(size: dict, threads=None) -> CheckResult:
    N = size["oned_replicas"]
    worst = 0.0
    bad = []
    for i, p in enumerate((0.3, 0.5, 0.9)):
        params = onedim.OneDParams(p)
        cmp = onedim.compare_1d(params, onedim.simulate_1d(params, N, CHECK_SEED + i), 20)
        zs = cmp["z_scores"]
        for name, z in [("mean", zs["mean"]), ("var", zs["var"])] + [
                (f"tail{n}", v) for n, v in zs["tails"].items()]:
            if z is None or abs(z) > SIGMAS:
                bad.append(f"p={p} {name} z={z}")
            elif z is not None:
                worst = max(worst, abs(z))
    return CheckResult(4, "1D closed forms", not bad,
                       f"max |z| {worst:.2f} over mean, variance, tails n<=20 at {N} replicas"
                       + (f"; failures: {bad}" if bad else ""))


def check_mc_vs_exact(size: dict, threads=None) -> CheckResult:
    rng = _rng(5)
    N = size["mc_replicas"]
    zs = []
    for i in range(size["mc_params"]):
        params = random_params(rng)
        truth = exact.exact_ez(params, Boundary.delta(), 10)
        batch = mc.simulate(mc.SimConfig(params, Boundary.delta(), 10, N, CHECK_SEED + i),
                            threads, record_ns=[10])
        z = batch.z[:, 0]
        se = z.std(ddof=1) / math.sqrt(N)
        zs.append(0.0 if se == 0 and z.mean() == truth else abs(z.mean() - truth) / se)
    ok = max(zs) <= SIGMAS
    return CheckResult(5, "MC vs exact E[Z_10]", ok,
                       "standard-error multiples " + ", ".join(f"{z:.2f}" for z in zs))


def coupling_pairs(rng: np.random.Generator) -> list:
    delta = Boundary.delta()
    pairs = [
        (Params(0.3, 0.3, 0.4), delta, Params(0.5, 0.5, 0.75), delta),
        (Params(0.65, 0.65, 0.8), delta, Params(0.7, 0.7, 0.9), delta),
        (Params(0.5, 0.5, 0.75), Boundary.empty(), Params(0.5, 0.5, 0.75), delta),
        (Params(0.6, 0.7, 0.8), Boundary(frozenset({0}), frozenset()),
         Params(0.6, 0.7, 0.8), Boundary(frozenset({0, 2}), frozenset({0}))),
    ]
    for _ in range(3):
        hi = random_params(rng)
        t = float(rng.random())
        lo = Params(hi.alpha * t, hi.beta * t, hi.gamma * t)
        pairs.append((lo, delta, hi, delta))
    return pairs


def check_coupling(size: dict, threads=None) -> CheckResult:
    N, n = size["coupling_replicas"], size["coupling_n"]
    total = 0
    sites = 0
    for i, (plo, blo, phi, bhi) in enumerate(coupling_pairs(_rng(6))):
        lo = mc.SimConfig(plo, blo, n, N, CHECK_SEED + i, stop_on_extinction=False)
        hi = mc.SimConfig(phi, bhi, n, N, CHECK_SEED + i, stop_on_extinction=False)
        res = mc.simulate_coupled(lo, hi, threads, record_ns=[n])
        total += res.total_violations
        sites += res.lo.site_updates
    return CheckResult(6, "coupling domination", total == 0,
                       f"{total} violations over {sites} coupled site pairs "
                       f"({N} replicas to n={n})")


def check_absorption(size: dict, threads=None) -> CheckResult:
    N = size["absorb_replicas"]
    configs = [
        (Params(0.5, 0.5, 0.75), Boundary.delta()),
        (Params(0.7, 0.7, 0.9), Boundary.delta()),
        (Params(0.68, 0.7, 0.85), Boundary(frozenset({0, 2}), frozenset({0}))),
        (Params(0.6, 0.6, 0.9), Boundary(frozenset({0, 3, 7}), frozenset({5}))),
        (Params(0.2, 0.1, 0.25), Boundary.empty()),
    ]
    violations = 0
    extinct = 0
    for i, (params, boundary) in enumerate(configs):
        batch = mc.simulate(mc.SimConfig(params, boundary, 300, N, CHECK_SEED + i,
                                         stop_on_extinction=False), threads)
        violations += mc.absorption_violations(batch, boundary.max_ignition)
        for r in np.flatnonzero(batch.extinction_n >= 0):
            e = batch.extinction_n[r]
            violations += int(np.count_nonzero(batch.y[r, e:]))
        extinct += int(np.count_nonzero(batch.extinction_n >= 0))
    return CheckResult(7, "extinction absorption", violations == 0,
                       f"{violations} re-ignitions after extinction; {extinct} extinct replicas checked")


def _run_cli(argv: Sequence[str]) -> tuple[int, str]:
    from .cli import main

    err = io.StringIO()
    with contextlib.redirect_stderr(err), contextlib.redirect_stdout(io.StringIO()):
        code = main(list(argv))
    return code, err.getvalue()


def check_determinism(size: dict, threads=None) -> CheckResult:
    outputs = {}
    problems = []
    with tempfile.TemporaryDirectory() as tmp:
        for t in (1, 2, 8):
            for kind, argv in (
                ("traces", ["simulate", "--alpha", "0.7", "--beta", "0.7", "--gamma", "0.9",
                            "--n-max", "150", "--replicas", "40", "--seed", "99"]),
                ("stats", ["simulate", "--alpha", "0.7", "--beta", "0.7", "--gamma", "0.9",
                           "--n-max", "150", "--replicas", "40", "--seed", "99"]),
                ("sweep", ["sweep", "--resolution", "3", "--n-max", "60", "--replicas", "30",
                           "--seed", "7"]),
            ):
                ext = "csv" if kind != "stats" else "json"
                path = os.path.join(tmp, f"{kind}-{t}.{ext}")
                code, err = _run_cli(argv + ["--threads", str(t), "--out", path])
                if code != 0:
                    problems.append(f"{kind} threads={t} exit {code}: {err.strip()}")
                    continue
                with open(path, "rb") as fh:
                    outputs.setdefault(kind, []).append(fh.read())
        resumed = os.path.join(tmp, "sweep-1.csv")
        code, err = _run_cli(["sweep", "--resolution", "3", "--n-max", "60", "--replicas", "30",
                              "--seed", "7", "--threads", "1", "--out", resumed, "--resume"])
        with open(resumed, "rb") as fh:
            outputs.setdefault("sweep", []).append(fh.read())
    for kind, blobs in outputs.items():
        if len(set(blobs)) != 1:
            problems.append(f"{kind} outputs differ across thread counts")
    return CheckResult(8, "determinism across threads", not problems,
                       "simulate (csv, json) and sweep byte-identical under 1, 2, 8 threads "
                       "and on resume" if not problems else "; ".join(problems))


def check_throughput(size: dict, threads=None) -> CheckResult:
    reps, n = size["throughput_replicas"], size["throughput_n"]
    with tempfile.TemporaryDirectory() as tmp:
        t0 = time.perf_counter()
        code, err = _run_cli(["simulate", "--n-max", str(n), "--replicas", str(reps),
                              "--alpha", "0.9", "--beta", "0.9", "--gamma", "0.95",
                              "--seed", "1", "--threads", "1",
                              "--out", os.path.join(tmp, "stats.json")])
        wall = time.perf_counter() - t0
    m = re.search(r"site_updates=(\d+) sites_visited=(\d+)", err)
    if code != 0 or m is None:
        return CheckResult(9, "throughput", False, f"simulate failed: {err.strip()}")
    updates, visited = int(m.group(1)), int(m.group(2))
    rate = visited / wall * 60
    return CheckResult(9, "throughput", rate >= 1e8,
                       f"{visited:.3g} sites evaluated ({updates:.3g} site updates) in {wall:.1f}s "
                       f"wall = {rate:.3g} evaluated sites/min single-threaded (>= 1e8), "
                       f"simulate --n-max {n} --replicas {reps}")


def check_converge(size: dict, threads=None) -> CheckResult:
    reps = size["converge_replicas"]
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "converge.json")
        t0 = time.perf_counter()
        argv = ["converge", "--alpha", "0.7", "--beta", "0.7", "--gamma", "0.9",
                "--replicas", str(reps), "--seed", "3", "--out", path]
        if threads:
            argv += ["--threads", str(threads)]
        code, err = _run_cli(argv)
        wall = time.perf_counter() - t0
        if code != 0:
            return CheckResult(10, "converge diagnostics", False, f"converge failed: {err.strip()}")
        with open(path) as fh:
            doc = json.load(fh)
    try:
        jsonschema.validate(doc, CONVERGENCE_SCHEMA)
        schema_ok = True
    except jsonschema.ValidationError as exc:
        schema_ok = False
        err = exc.message
    table_ok = (doc["checkpoints"] == list(DEFAULT_CHECKPOINTS)
                and len(doc["cauchy"]) == len(DEFAULT_CHECKPOINTS) - 1
                and all(len(row["fractions"]) == len(DEFAULT_EPSILONS) for row in doc["cauchy"]))
    ok = schema_ok and table_ok and wall < 600
    fr = "; ".join(f"m={row['m']}: " + ",".join(f"{v:.3f}" for v in row["fractions"].values())
                   for row in doc["cauchy"])
    return CheckResult(10, "converge diagnostics", ok,
                       f"schema {'valid' if schema_ok else 'INVALID: ' + err}, {reps} replicas in "
                       f"{wall:.1f}s (< 600s); Cauchy fractions [eps {DEFAULT_EPSILONS}] {fr}")


CHECKS: dict[int, Callable[..., CheckResult]] = {
    1: check_oracle_equivalence,
    2: check_beta_identity,
    3: check_column_law,
    4: check_oned,
    5: check_mc_vs_exact,
    6: check_coupling,
    7: check_absorption,
    8: check_determinism,
    9: check_throughput,
    10: check_converge,
}


def run_check(number: int, quick: bool = False, threads: Optional[int] = None) -> CheckResult:
    size = QUICK if quick else FULL
    t0 = time.perf_counter()
    res = CHECKS[number](size, threads)
    res.seconds = time.perf_counter() - t0
    return res


def run_checks(quick: bool = False, only: Optional[Sequence[int]] = None,
               threads: Optional[int] = None) -> Iterator[CheckResult]:
    for number in sorted(CHECKS):
        if only and number not in only:
            continue
        yield run_check(number, quick, threads)
