"""Command-line entry point: ``pyrofield <subcommand> [flags]``.

Exit status is 0 on success, 2 for invalid input and 1 when an internal
consistency check fails. Every error is a single ``ERROR <code>: <detail>``
line on standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import analysis, exact, mc, onedim
from .errors import InternalConsistencyError, PyrofieldError, ValidationError
from .model import Boundary, Params

DEFAULTS_EPILOG = (
    "engine defaults: n_max_exact=%d, n_max_enum=%d, epsilons=%s, "
    "checkpoint schedule doubling %s"
    % (exact.N_MAX_EXACT, exact.N_MAX_ENUM,
       ",".join(map(str, analysis.DEFAULT_EPSILONS)),
       ",".join(map(str, analysis.DEFAULT_CHECKPOINTS)))
)


class UsageError(ValidationError):
    code = "usage"


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Append ``(default: x)`` unless the help already explains the default
    or there is nothing meaningful to show."""

    def _get_help_string(self, action):
        help_ = action.help or ""
        if "(default" in help_ or action.default in (None, False, argparse.SUPPRESS):
            return help_
        return super()._get_help_string(action)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _nonneg(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def parse_record(text: str, n_max: int) -> np.ndarray:
    """``n0:n1`` or ``n0:n1:stride`` (inclusive ends) into diagonal indices."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise UsageError(f"--record expects n0:n1 or n0:n1:stride, got {text!r}")
    try:
        n0, n1 = int(parts[0]), int(parts[1])
        stride = int(parts[2]) if len(parts) == 3 else 1
    except ValueError:
        raise UsageError(f"--record expects integers, got {text!r}") from None
    if not (0 <= n0 <= n1 <= n_max) or stride < 1:
        raise UsageError(f"--record range {text!r} must satisfy 0 <= n0 <= n1 <= n_max={n_max}, stride >= 1")
    return np.arange(n0, n1 + 1, stride, dtype=np.int64)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--alpha", type=float, default=0.5, help="burn probability, left neighbour only")
    g.add_argument("--beta", type=float, default=0.5, help="burn probability, bottom neighbour only")
    g.add_argument("--gamma", type=float, default=0.75, help="burn probability, both neighbours")
    g.add_argument("--fire-x", default="0", help="indices j with S(j,-1)=1, comma-separated")
    g.add_argument("--fire-y", default="0", help="indices k with S(-1,k)=1, comma-separated")


def _add_run_flags(p: argparse.ArgumentParser, replicas: int, seed_required: bool = True) -> None:
    p.add_argument("--replicas", type=_positive, default=replicas, help="independent replicas")
    p.add_argument("--seed", type=_seed, required=seed_required,
                   help="master seed; all randomness derives from it (required)")
    p.add_argument("--threads", type=_positive, default=None,
                   help="worker threads (default: $PYROFIELD_THREADS, else CPU count)")


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    parser = _Parser(prog="pyrofield", description="Exact and Monte Carlo engines for the "
                     "two-neighbour forest-fire random field.", epilog=DEFAULTS_EPILOG,
                     formatter_class=fmt, allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, help=help_, description=help_, epilog=DEFAULTS_EPILOG,
                              formatter_class=fmt, allow_abbrev=False)

    p = add("exact", "exact law of Y_n and E[Z_n] on diagonal n")
    _add_model_flags(p)
    p.add_argument("--n", type=_nonneg, default=10, help="diagonal index")
    p.add_argument("--n-max-exact", type=_nonneg, default=exact.N_MAX_EXACT,
                   help="largest diagonal the exact engine will build")
    p.add_argument("--out", help="JSON output path (default: stdout)")
    p.add_argument("--csv", help="also write the diagonal distribution as config_index,probability")

    p = add("simulate", "Monte Carlo replicas of the field")
    _add_model_flags(p)
    _add_run_flags(p, replicas=100)
    p.add_argument("--n-max", type=_nonneg, default=1000, help="last diagonal simulated")
    p.add_argument("--record", help="diagonals to record, n0:n1 or n0:n1:stride (default: all)")
    p.add_argument("--out", help="traces.csv or stats.json (default: JSON stats on stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="override the format implied by --out")
    p.add_argument("--no-stop-on-extinction", action="store_true",
                   help="keep simulating after the fire has died out")

    p = add("sweep", "mean Z over the grid of valid parameter triples")
    p.add_argument("--fire-x", default="0", help="indices j with S(j,-1)=1, comma-separated")
    p.add_argument("--fire-y", default="0", help="indices k with S(-1,k)=1, comma-separated")
    _add_run_flags(p, replicas=100)
    p.add_argument("--resolution", type=_positive, default=5, help="grid points per axis (>= 2)")
    p.add_argument("--n-max", type=_nonneg, default=100, help="last diagonal simulated per cell")
    p.add_argument("--checkpoint", type=_nonneg, default=None, help="diagonal reported (default: n-max)")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--resume", action="store_true", help="skip cells already in --out")
    p.add_argument("--no-stop-on-extinction", action="store_true",
                   help="keep simulating after the fire has died out")

    p = add("oned", "one-dimensional chain: closed forms vs simulation")
    p.add_argument("--p", type=float, required=True, help="burn probability of each tree")
    _add_run_flags(p, replicas=100_000)
    p.add_argument("--max-tail", type=_positive, default=20, help="largest n reported for P{Y >= n}")
    p.add_argument("--out", help="JSON output path (default: stdout)")

    p = add("converge", "within-path Cauchy diagnostics for Z_n")
    _add_model_flags(p)
    _add_run_flags(p, replicas=10_000)
    p.add_argument("--checkpoints", type=_int_list, default=list(analysis.DEFAULT_CHECKPOINTS),
                   help="increasing diagonals, comma-separated")
    p.add_argument("--epsilons", type=_float_list, default=list(analysis.DEFAULT_EPSILONS),
                   help="tolerances for the Cauchy fractions, comma-separated")
    p.add_argument("--out", help="JSON output path (default: stdout)")

    p = add("verify", "run the acceptance checks and print PASS/FAIL per check")
    p.add_argument("--quick", action="store_true", help="reduced sample sizes")
    p.add_argument("--only", type=_int_list, default=None, help="criterion numbers to run")
    p.add_argument("--threads", type=_positive, default=None,
                   help="worker threads (default: $PYROFIELD_THREADS, else CPU count)")
    return parser


def _params(args) -> Params:
    return Params(args.alpha, args.beta, args.gamma)


def _boundary(args) -> Boundary:
    return Boundary.parse(args.fire_x, args.fire_y)


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def cmd_exact(args) -> int:
    params, boundary = _params(args), _boundary(args)
    dist = exact.diagonal_distribution(params, boundary, args.n, args.n_max_exact)
    pmf = exact.yn_pmf(dist)
    doc = {"n": args.n, "ez": pmf.mean_z, "pmf": [float(v) for v in pmf.pmf],
           "params": params.to_dict(), "boundary": boundary.to_dict()}
    _emit(_dumps(doc), args.out)
    if args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("config_index", "probability"))
        for i, v in enumerate(dist.probs):
            w.writerow((i, repr(float(v))))
        _emit(buf.getvalue(), args.csv)
    return 0


def traces_csv(batch: mc.TraceBatch) -> str:
    buf = io.StringIO()
    buf.write("replica_id,n,y,z\n")
    z = batch.z
    ns = [str(int(n)) for n in batch.ns]
    for r, rid in enumerate(batch.replica_ids):
        rid = str(int(rid))
        yr = batch.y[r]
        zr = z[r]
        buf.writelines(f"{rid},{ns[c]},{int(yr[c])},{float(zr[c])!r}\n" for c in range(len(ns)))
    return buf.getvalue()


def cmd_simulate(args) -> int:
    params, boundary = _params(args), _boundary(args)
    config = mc.SimConfig(params, boundary, args.n_max, args.replicas, args.seed,
                          stop_on_extinction=not args.no_stop_on_extinction)
    record = parse_record(args.record, args.n_max) if args.record else None
    fmt = args.format
    if fmt is None:
        fmt = "csv" if args.out and args.out.endswith(".csv") else "json"
    t0 = time.perf_counter()
    batch = mc.simulate(config, args.threads, record_ns=record)
    elapsed = time.perf_counter() - t0
    if mc.absorption_violations(batch, boundary.max_ignition) and record is None:
        raise InternalConsistencyError("a dead fire re-ignited past the last ignition index")
    if fmt == "csv":
        text = traces_csv(batch)
    else:
        text = _dumps({"params": params.to_dict(), "boundary": boundary.to_dict(),
                       "n_max": args.n_max, "replicas": args.replicas, "seed": args.seed,
                       "stats": batch.stats()})
    _emit(text, args.out)
    rate = batch.sites_visited / elapsed * 60 if elapsed > 0 else float("inf")
    print(f"INFO throughput: site_updates={batch.site_updates} sites_visited={batch.sites_visited} "
          f"seconds={elapsed:.3f} visited_per_minute={rate:.4g}", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    boundary = Boundary.parse(args.fire_x, args.fire_y)
    if args.resolution < 2:
        raise UsageError("--resolution must be >= 2")
    grid = analysis.valid_grid(args.resolution)
    template = mc.SimConfig(grid[0], boundary, args.n_max, args.replicas, args.seed,
                            stop_on_extinction=not args.no_stop_on_extinction)
    result = analysis.run_sweep(grid, template, args.checkpoint, args.out, args.resume, args.threads)
    for err in result.errors:
        print(f"ERROR io: {err}", file=sys.stderr)
    return 0


def cmd_oned(args) -> int:
    params = onedim.OneDParams(args.p)
    sample = onedim.simulate_1d(params, args.replicas, args.seed)
    doc = {"p": params.p, "replicas": args.replicas, "seed": args.seed}
    doc.update(onedim.compare_1d(params, sample, args.max_tail))
    _emit(_dumps(doc), args.out)
    return 0


def cmd_converge(args) -> int:
    params, boundary = _params(args), _boundary(args)
    config = mc.SimConfig(params, boundary, max(args.checkpoints, default=0), args.replicas, args.seed)
    report = analysis.run_convergence(config, args.checkpoints, args.epsilons, args.threads)
    doc = {"params": params.to_dict(), "boundary": boundary.to_dict(), "seed": args.seed}
    doc.update(report.to_dict())
    _emit(_dumps(doc), args.out)
    return 0


def cmd_verify(args) -> int:
    from .verify import run_checks

    ok = True
    for res in run_checks(quick=args.quick, only=args.only, threads=args.threads):
        print(res.line(), flush=True)
        ok = ok and res.passed
    return 0 if ok else 1


COMMANDS = {
    "exact": cmd_exact,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "oned": cmd_oned,
    "converge": cmd_converge,
    "verify": cmd_verify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return 2
    except PyrofieldError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"ERROR io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
