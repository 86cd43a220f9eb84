"""Streaming Monte Carlo of the field, one anti-diagonal at a time.

Site ``(j, n - j)`` burns iff ``U(seed, replica, n, j) < kernel(left, bottom)``
where ``U`` comes from :mod:`pyrofield.rng`. Because the uniform of a site does
not depend on what else was drawn, a site whose burn probability is 0 or 1
never needs one, and two fields run on the same uniforms are coupled exactly.
Under ordered parameters the coupled fields are ordered site by site.

Only two diagonals per field are resident. The loop over a diagonal is
restricted to the span of sites that have a burning neighbour, which is where
all the work is for subcritical or young fires.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .errors import CouplingOrderViolation, ValidationError
from .model import Boundary, Params
from .rng import STREAM_FIELD, philox4x64, to_unit

QUANTILES = (5, 25, 50, 75, 95)


@dataclass(frozen=True)
class SiteWindow:
    """Inclusive rectangle ``j0 <= j <= j1``, ``k0 <= k <= k1``."""

    j0: int
    j1: int
    k0: int
    k1: int

    def __post_init__(self):
        if not (0 <= self.j0 <= self.j1 and 0 <= self.k0 <= self.k1):
            raise ValidationError(f"bad site window {self}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.j1 - self.j0 + 1, self.k1 - self.k0 + 1)


@dataclass(frozen=True)
class SimConfig:
    params: Params
    boundary: Boundary = field(default_factory=Boundary.delta)
    n_max: int = 100
    replicas: int = 1
    master_seed: int = 0
    stop_on_extinction: bool = True
    record_sites: Optional[SiteWindow] = None

    def __post_init__(self):
        if self.n_max < 0:
            raise ValidationError("n_max must be >= 0")
        if self.replicas < 1:
            raise ValidationError("replicas must be >= 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")
        w = self.record_sites
        if w is not None and w.j1 + w.k1 > self.n_max:
            raise ValidationError(f"record window reaches diagonal {w.j1 + w.k1} > n_max={self.n_max}")


@dataclass
class ReplicaTrace:
    replica_id: int
    y_series: np.ndarray
    extinction_n: Optional[int]

    @property
    def z_series(self) -> np.ndarray:
        return self.y_series / np.arange(1, self.y_series.size + 1)


@dataclass
class TraceBatch:
    """``y[r, c]`` is ``Y_n`` with ``n = ns[c]`` in replica ``replica_ids[r]``."""

    replica_ids: np.ndarray
    ns: np.ndarray
    y: np.ndarray
    extinction_n: np.ndarray  # -1 when the fire never died out
    site_updates: int = 0  # sites on every simulated diagonal
    sites_visited: int = 0  # sites the kernel actually evaluated
    window_counts: Optional[np.ndarray] = None

    @property
    def z(self) -> np.ndarray:
        return self.y / (self.ns + 1.0)

    def column(self, n: int) -> int:
        idx = np.searchsorted(self.ns, n)
        if idx >= self.ns.size or self.ns[idx] != n:
            raise ValidationError(f"diagonal {n} was not recorded")
        return int(idx)

    def trace(self, r: int) -> ReplicaTrace:
        if not np.array_equal(self.ns, np.arange(self.ns.size)):
            raise ValidationError("full traces need every diagonal recorded")
        ext = int(self.extinction_n[r])
        return ReplicaTrace(int(self.replica_ids[r]), self.y[r].astype(np.int64),
                            None if ext < 0 else ext)

    def traces(self) -> list[ReplicaTrace]:
        return [self.trace(r) for r in range(self.replica_ids.size)]

    @classmethod
    def from_traces(cls, traces: Sequence[ReplicaTrace]) -> TraceBatch:
        length = min(t.y_series.size for t in traces)
        return cls(
            replica_ids=np.array([t.replica_id for t in traces], dtype=np.int64),
            ns=np.arange(length, dtype=np.int64),
            y=np.stack([t.y_series[:length] for t in traces]),
            extinction_n=np.array([-1 if t.extinction_n is None else t.extinction_n
                                   for t in traces], dtype=np.int64),
        )

    def extinct_fraction(self, n: int) -> float:
        ext = self.extinction_n
        return float(np.mean((ext >= 0) & (ext <= n)))

    def stats(self) -> list[dict]:
        """Per recorded diagonal: mean/variance/quantiles of Z and extinct fraction."""
        z = self.z
        ddof = 1 if z.shape[0] > 1 else 0
        means = z.mean(axis=0)
        var = z.var(axis=0, ddof=ddof)
        qs = np.percentile(z, QUANTILES, axis=0)
        return [
            {
                "n": int(n),
                "mean_z": float(means[c]),
                "var_z": float(var[c]),
                "quantiles": [float(q) for q in qs[:, c]],
                "extinct_frac": self.extinct_fraction(int(n)),
            }
            for c, n in enumerate(self.ns)
        ]


@njit(cache=True, nogil=True)
def _run_batch(tables, fx, fy, max_ign, n_max, seed, rids, stop,
               rec_col, y_out, ext_out, win, counts, updates, visited, violations):
    """Simulate ``tables.shape[0]`` fields on shared uniforms for each replica.

    Spans are inclusive index ranges of burnt sites, empty when lo > hi.
    Buffers are kept zero outside their span so only spans need clearing.
    """
    nf = tables.shape[0]
    nb = fx.shape[1]
    prev = np.zeros((nf, n_max + 2), dtype=np.uint8)
    cur = np.zeros((nf, n_max + 2), dtype=np.uint8)
    plo = np.zeros(nf, dtype=np.int64)
    phi = np.zeros(nf, dtype=np.int64)
    clo = np.zeros(nf, dtype=np.int64)
    chi = np.zeros(nf, dtype=np.int64)
    nlo = np.zeros(nf, dtype=np.int64)
    nhi = np.zeros(nf, dtype=np.int64)
    ny = np.zeros(nf, dtype=np.int64)
    s = np.zeros(nf, dtype=np.uint8)
    use_win = win[0] >= 0
    stream = np.uint64(STREAM_FIELD)
    zero = np.uint64(0)
    for r in range(rids.shape[0]):
        key1 = np.uint64(rids[r])
        prev[:, :] = 0
        cur[:, :] = 0
        n_updates = 0
        n_visit = nf
        n_viol = 0
        all_dead = True
        u0 = -1.0
        for f in range(nf):
            bl = fy[f, 0] if nb > 0 else 0
            bb = fx[f, 0] if nb > 0 else 0
            kap = tables[f, bl, bb]
            if kap >= 1.0:
                s[f] = 1
            elif kap <= 0.0:
                s[f] = 0
            else:
                if u0 < 0.0:
                    w = philox4x64(np.uint64(1), zero, stream, zero, seed, key1)
                    u0 = to_unit(w[0])
                s[f] = 1 if u0 < kap else 0
            prev[f, 0] = s[f]
            plo[f] = 0 if s[f] else 1
            phi[f] = 0
            clo[f] = 1
            chi[f] = 0
            ext_out[f, r] = -1
            if s[f] == 0 and 0 > max_ign[f]:
                ext_out[f, r] = 0
            else:
                all_dead = False
            if rec_col[0] >= 0:
                y_out[f, r, rec_col[0]] = s[f]
            if use_win and s[f] and win[0] == 0 and win[2] == 0:
                counts[f, 0, 0] += 1
        if nf == 2 and s[0] > s[1]:
            n_viol += 1
        n_updates += nf
        for m in range(1, n_max + 1):
            if stop and all_dead:
                break
            jlo = m + 1
            jhi = -1
            for f in range(nf):
                if plo[f] <= phi[f]:
                    if plo[f] < jlo:
                        jlo = plo[f]
                    if phi[f] + 1 > jhi:
                        jhi = phi[f] + 1
                if m < nb:
                    if fy[f, m]:
                        jlo = 0
                        if jhi < 0:
                            jhi = 0
                    if fx[f, m]:
                        jhi = m
                        if jlo > m:
                            jlo = m
                for j in range(clo[f], chi[f] + 1):
                    cur[f, j] = 0
                nlo[f] = m + 1
                nhi[f] = -1
                ny[f] = 0
            cached = -1
            w0 = zero
            w1 = zero
            w2 = zero
            w3 = zero
            for j in range(jlo, jhi + 1):
                u = -1.0
                for f in range(nf):
                    if j >= 1:
                        left = prev[f, j - 1]
                    else:
                        left = fy[f, m] if m < nb else 0
                    if j < m:
                        bottom = prev[f, j]
                    else:
                        bottom = fx[f, m] if m < nb else 0
                    kap = tables[f, left, bottom]
                    if kap >= 1.0:
                        st = 1
                    elif kap <= 0.0:
                        st = 0
                    else:
                        if u < 0.0:
                            block = j >> 2
                            if block != cached:
                                w0, w1, w2, w3 = philox4x64(
                                    np.uint64(block + 1), np.uint64(m), stream, zero, seed, key1)
                                cached = block
                            lane = j & 3
                            if lane == 0:
                                u = to_unit(w0)
                            elif lane == 1:
                                u = to_unit(w1)
                            elif lane == 2:
                                u = to_unit(w2)
                            else:
                                u = to_unit(w3)
                        st = 1 if u < kap else 0
                    s[f] = st
                    if st:
                        cur[f, j] = 1
                        ny[f] += 1
                        if j < nlo[f]:
                            nlo[f] = j
                        nhi[f] = j
                        if use_win:
                            k = m - j
                            if win[0] <= j <= win[1] and win[2] <= k <= win[3]:
                                counts[f, j - win[0], k - win[2]] += 1
                if nf == 2 and s[0] > s[1]:
                    n_viol += 1
            n_updates += nf * (m + 1)
            if jhi >= jlo:
                n_visit += nf * (jhi - jlo + 1)
            all_dead = True
            for f in range(nf):
                if rec_col[m] >= 0:
                    y_out[f, r, rec_col[m]] = ny[f]
                if ext_out[f, r] < 0:
                    if ny[f] == 0 and m > max_ign[f]:
                        ext_out[f, r] = m
                    else:
                        all_dead = False
                clo[f] = plo[f]
                chi[f] = phi[f]
                plo[f] = nlo[f]
                phi[f] = nhi[f]
            tmp = prev
            prev = cur
            cur = tmp
        updates[r] = n_updates
        visited[r] = n_visit
        violations[r] = n_viol


def default_threads() -> int:
    env = os.environ.get("PYROFIELD_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValidationError(f"PYROFIELD_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise ValidationError("PYROFIELD_THREADS must be >= 1")
        return value
    return os.cpu_count() or 1


def _record_columns(n_max: int, record_ns) -> tuple[np.ndarray, np.ndarray]:
    if record_ns is None:
        ns = np.arange(n_max + 1, dtype=np.int64)
    else:
        ns = np.unique(np.asarray(record_ns, dtype=np.int64))
        if ns.size and (ns[0] < 0 or ns[-1] > n_max):
            raise ValidationError(f"recorded diagonals must lie in 0..{n_max}")
    col = np.full(n_max + 1, -1, dtype=np.int64)
    col[ns] = np.arange(ns.size)
    return ns, col


def _run(configs: Sequence[SimConfig], threads: Optional[int], record_ns,
         replica_ids=None):
    """Shared driver for single and coupled runs; returns per-field arrays."""
    base = configs[0]
    nf = len(configs)
    n_max = base.n_max
    if replica_ids is None:
        replica_ids = np.arange(base.replicas, dtype=np.int64)
    rids = np.ascontiguousarray(replica_ids, dtype=np.int64)
    nb = max(c.boundary.max_ignition for c in configs) + 1
    fx = np.zeros((nf, nb), dtype=np.uint8)
    fy = np.zeros((nf, nb), dtype=np.uint8)
    for f, c in enumerate(configs):
        fx[f], fy[f] = c.boundary.masks(nb)
    tables = np.stack([c.params.table() for c in configs])
    max_ign = np.array([c.boundary.max_ignition for c in configs], dtype=np.int64)
    ns, col = _record_columns(n_max, record_ns)
    window = base.record_sites
    if window is None:
        win = np.full(4, -1, dtype=np.int64)
        wshape = (1, 1)
    else:
        win = np.array([window.j0, window.j1, window.k0, window.k1], dtype=np.int64)
        wshape = window.shape

    R = rids.size
    y = np.zeros((nf, R, ns.size), dtype=np.int32)
    ext = np.full((nf, R), -1, dtype=np.int64)
    updates = np.zeros(R, dtype=np.int64)
    visited = np.zeros(R, dtype=np.int64)
    violations = np.zeros(R, dtype=np.int64)
    threads = max(1, min(threads or default_threads(), R))
    bounds = np.linspace(0, R, threads + 1).astype(np.int64)
    counts = np.zeros((threads, nf) + wshape, dtype=np.int64)
    seed = np.uint64(base.master_seed)

    def work(t):
        a, b = bounds[t], bounds[t + 1]
        # slices along the replica axis are views, so the kernel writes in place
        _run_batch(tables, fx, fy, max_ign, n_max, seed, rids[a:b],
                   base.stop_on_extinction, col, y[:, a:b], ext[:, a:b],
                   win, counts[t], updates[a:b], visited[a:b], violations[a:b])

    if threads == 1:
        work(0)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(threads)))
    window_counts = counts.sum(axis=0) if window is not None else None
    batches = [
        TraceBatch(rids, ns, y[f], ext[f], int(updates.sum()) // nf,
                   int(visited.sum()) // nf,
                   None if window_counts is None else window_counts[f])
        for f in range(nf)
    ]
    return batches, violations


def simulate(config: SimConfig, threads: Optional[int] = None, record_ns=None,
             replica_ids=None) -> TraceBatch:
    """Run ``config.replicas`` replicas (ids ``0..replicas-1`` unless given)."""
    batches, _ = _run([config], threads, record_ns, replica_ids)
    return batches[0]


def simulate_replica(config: SimConfig, replica_id: int) -> ReplicaTrace:
    batch = simulate(config, threads=1, replica_ids=[replica_id])
    return batch.trace(0)


@dataclass
class CoupledResult:
    lo: TraceBatch
    hi: TraceBatch
    violations: np.ndarray  # per replica: sites with lo burnt and hi not

    @property
    def total_violations(self) -> int:
        return int(self.violations.sum())


def simulate_coupled(config_lo: SimConfig, config_hi: SimConfig,
                     threads: Optional[int] = None, record_ns=None) -> CoupledResult:
    """Run both configurations on the same site uniforms.

    The lower field must have componentwise smaller parameters and an ignition
    boundary contained in the upper one; every site is then checked for
    ``lo <= hi`` inside the kernel.
    """
    if not config_lo.params.dominated_by(config_hi.params):
        raise CouplingOrderViolation(
            f"parameters {config_lo.params.to_dict()} are not below {config_hi.params.to_dict()}")
    if not config_lo.boundary.issubset(config_hi.boundary):
        raise CouplingOrderViolation("lower boundary must be contained in the upper boundary")
    for name in ("n_max", "replicas", "master_seed", "stop_on_extinction"):
        if getattr(config_lo, name) != getattr(config_hi, name):
            raise CouplingOrderViolation(f"coupled runs must share {name}")
    (lo, hi), violations = _run([config_lo, config_hi], threads, record_ns)
    return CoupledResult(lo, hi, violations)


def burn_frequency(config: SimConfig, threads: Optional[int] = None) -> np.ndarray:
    """Fraction of replicas in which each site of ``config.record_sites`` burnt;
    entry ``[a, b]`` is site ``(j0 + a, k0 + b)``."""
    if config.record_sites is None:
        raise ValidationError("burn_frequency needs record_sites")
    w = config.record_sites
    batch = simulate(config, threads, record_ns=[w.j1 + w.k1])
    return batch.window_counts / config.replicas


def absorption_violations(batch: TraceBatch, max_ignition: int) -> int:
    """Count recorded diagonals that burn after an all-zero diagonal past every
    ignition index (needs consecutive recorded diagonals to be meaningful)."""
    y = batch.y
    past = batch.ns > max_ignition
    dead = (y == 0) & past[None, :]
    seen_dead = np.cumsum(dead, axis=1) > 0
    # a diagonal counts if some earlier recorded diagonal was dead
    earlier = np.zeros_like(seen_dead)
    earlier[:, 1:] = seen_dead[:, :-1]
    return int(np.count_nonzero(earlier & (y > 0)))
