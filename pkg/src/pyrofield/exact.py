"""Exact law of the field on small triangles.

Two independent routes are provided:

* the forward recursion over anti-diagonals (``initial_distribution`` /
  ``step_distribution``), which exploits that the next diagonal is a product
  of per-site kernels given the current one;
* ``triangle_enumeration``, a brute-force product over every site of the
  triangle ``j + k <= n``, used as an oracle and for cylinder events.

Distributions over a diagonal are dense vectors indexed by the configuration
code, whose bit ``j`` is the status of site ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Mapping

import numpy as np

from .errors import EnumLimitExceeded, ExactLimitExceeded, NormalizationError, ValidationError
from .model import Boundary, Params, diagonal0_neighbors, kernel

N_MAX_EXACT = 12
N_MAX_ENUM = 5
NORM_TOL = 1e-12


def _check_probs(probs: np.ndarray, what: str) -> None:
    total = probs.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise NormalizationError(f"{what} sums to {total!r}, off by {total - 1.0:.3e}")
    if probs.min() < -NORM_TOL or probs.max() > 1.0 + NORM_TOL:
        raise NormalizationError(f"{what} has entries outside [0, 1]")


@dataclass(frozen=True)
class DiagonalDistribution:
    n: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (1 << (self.n + 1),):
            raise ValidationError(f"diagonal {self.n} needs {1 << (self.n + 1)} probabilities")
        _check_probs(probs, f"distribution of diagonal {self.n}")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    def marginal(self, j: int) -> float:
        """P{S(j, n - j) = 1}."""
        codes = np.arange(self.probs.size)
        return float(self.probs[(codes >> j) & 1 == 1].sum())

    def marginals(self) -> np.ndarray:
        return np.array([self.marginal(j) for j in range(self.n + 1)])


@dataclass(frozen=True)
class YnPmf:
    n: int
    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=np.float64)
        if pmf.shape != (self.n + 2,):
            raise ValidationError(f"pmf of Y_{self.n} needs {self.n + 2} entries")
        _check_probs(pmf, f"pmf of Y_{self.n}")
        pmf.flags.writeable = False
        object.__setattr__(self, "pmf", pmf)

    @property
    def mean_y(self) -> float:
        return float(np.dot(np.arange(self.n + 2), self.pmf))

    @property
    def mean_z(self) -> float:
        return self.mean_y / (self.n + 1)

    @property
    def var_z(self) -> float:
        z = np.arange(self.n + 2) / (self.n + 1)
        return float(np.dot(z * z, self.pmf) - self.mean_z ** 2)


def _kernel_tensor(params: Params) -> np.ndarray:
    """``K[e, left, bottom]``: probability that a site takes status ``e``."""
    burn = params.table()
    return np.stack([1.0 - burn, burn])


def initial_distribution(params: Params, boundary: Boundary) -> DiagonalDistribution:
    p = kernel(params, diagonal0_neighbors(boundary))
    return DiagonalDistribution(0, np.array([1.0 - p, p]))


def step_distribution(params: Params, boundary: Boundary, dist: DiagonalDistribution,
                      n_max_exact: int = N_MAX_EXACT) -> DiagonalDistribution:
    """Distribution of diagonal ``n + 1`` from that of diagonal ``n``.

    The sum over predecessor configurations is contracted one output site at
    a time: output site ``j`` only reads predecessor sites ``j - 1`` and ``j``,
    so predecessor ``j - 1`` can be summed out right after output ``j`` is
    attached. The working array never exceeds ``2 ** (n + 2)`` entries.
    """
    n = dist.n
    if n + 1 > n_max_exact:
        raise ExactLimitExceeded(f"diagonal {n + 1} exceeds n_max_exact={n_max_exact}")
    K = _kernel_tensor(params)
    left0 = boundary.left_edge(n + 1)
    bottom_end = boundary.bottom_edge(n + 1)

    # C-order layout: low bits are the attached outputs, high bits the
    # predecessor sites still to be consumed.
    w = dist.probs.reshape(1 << n, 2)
    out = np.empty((1 << n, 2, 2))
    for e in (0, 1):
        out[:, :, e] = w * K[e, left0, :]
    w = out
    for j in range(1, n + 1):
        w4 = w.reshape(1 << (n - j), 2, 2, 1 << j)  # rest, prev_j, prev_{j-1}, outputs
        out = np.empty_like(w4)
        for e in (0, 1):
            out[:, :, e, :] = (w4[:, :, 0, :] * K[e, 0, :][None, :, None]
                               + w4[:, :, 1, :] * K[e, 1, :][None, :, None])
        w = out
    w2 = w.reshape(2, 1 << (n + 1))  # prev_n, outputs
    out = np.empty((2, 1 << (n + 1)))
    for e in (0, 1):
        out[e] = w2[0] * K[e, 0, bottom_end] + w2[1] * K[e, 1, bottom_end]
    return DiagonalDistribution(n + 1, out.reshape(-1))


def forward(params: Params, boundary: Boundary, n: int,
            n_max_exact: int = N_MAX_EXACT) -> Iterator[DiagonalDistribution]:
    """Yield the distributions of diagonals ``0..n``."""
    if n > n_max_exact:
        raise ExactLimitExceeded(f"diagonal {n} exceeds n_max_exact={n_max_exact}")
    dist = initial_distribution(params, boundary)
    yield dist
    for _ in range(n):
        dist = step_distribution(params, boundary, dist, n_max_exact)
        yield dist


def diagonal_distribution(params: Params, boundary: Boundary, n: int,
                          n_max_exact: int = N_MAX_EXACT) -> DiagonalDistribution:
    for dist in forward(params, boundary, n, n_max_exact):
        pass
    return dist


def yn_pmf(dist: DiagonalDistribution) -> YnPmf:
    codes = np.arange(dist.probs.size, dtype=np.uint64)
    counts = np.bitwise_count(codes).astype(np.intp)
    return YnPmf(dist.n, np.bincount(counts, weights=dist.probs, minlength=dist.n + 2))


def exact_ez(params: Params, boundary: Boundary, n: int,
             n_max_exact: int = N_MAX_EXACT) -> float:
    return yn_pmf(diagonal_distribution(params, boundary, n, n_max_exact)).mean_z


# --- brute-force oracle -----------------------------------------------------

def triangle_sites(n: int) -> list[tuple[int, int]]:
    return [(j, d - j) for d in range(n + 1) for j in range(d + 1)]


@dataclass(frozen=True)
class TriangleJoint:
    """Joint law of every site with ``j + k <= n``; bit ``i`` of a code is the
    status of ``sites[i]``."""

    n: int
    sites: tuple
    probs: np.ndarray

    @cached_property
    def _codes(self) -> np.ndarray:
        return np.arange(self.probs.size, dtype=np.uint32)

    def site_bits(self, site: tuple[int, int]) -> np.ndarray:
        idx = self.sites.index(site)
        return (self._codes >> idx) & 1

    def diagonal_marginal(self, m: int) -> np.ndarray:
        """Distribution of diagonal ``m`` (same encoding as DiagonalDistribution)."""
        if not 0 <= m <= self.n:
            raise ValidationError(f"diagonal {m} is outside the triangle of size {self.n}")
        # sites of diagonal m are contiguous in the site order, starting at m(m+1)/2
        first = m * (m + 1) // 2
        diag_code = ((self._codes >> first) & ((1 << (m + 1)) - 1)).astype(np.intp)
        return np.bincount(diag_code, weights=self.probs, minlength=1 << (m + 1))

    def event_probability(self, constraints: Mapping[tuple[int, int], int]) -> float:
        mask = np.ones(self.probs.size, dtype=bool)
        for site, status in constraints.items():
            mask &= self.site_bits(site) == status
        return float(self.probs[mask].sum())


def triangle_enumeration(params: Params, boundary: Boundary, n: int,
                         n_max_enum: int = N_MAX_ENUM) -> TriangleJoint:
    """Probability of every configuration of the triangle as the product of
    the local kernel over all its sites.

    Sites are added one at a time in diagonal order; both neighbours of a site
    precede it, so the table over the first ``i`` sites extends to ``i + 1``
    sites by one multiplication per entry.
    """
    if n < 0:
        raise ValidationError("triangle size must be nonnegative")
    if n > n_max_enum:
        raise EnumLimitExceeded(f"triangle {n} exceeds n_max_enum={n_max_enum}")
    sites = triangle_sites(n)
    position = {s: i for i, s in enumerate(sites)}
    table = params.table()
    probs = np.ones(1)
    for i, (j, k) in enumerate(sites):
        codes = np.arange(1 << i, dtype=np.uint32)
        if j >= 1:
            left = (codes >> position[(j - 1, k)]) & 1
        else:
            left = np.full(codes.size, boundary.left_edge(k), dtype=np.uint32)
        if k >= 1:
            bottom = (codes >> position[(j, k - 1)]) & 1
        else:
            bottom = np.full(codes.size, boundary.bottom_edge(j), dtype=np.uint32)
        burn = table[left, bottom]
        probs = np.concatenate([probs * (1.0 - burn), probs * burn])
    return TriangleJoint(n, tuple(sites), probs)


@dataclass(frozen=True)
class CylinderEvent:
    """Required statuses for finitely many sites, e.g. ``{(1, 2): 0, (1, 1): 1}``."""

    constraints: Mapping

    def __post_init__(self):
        items = self.constraints.items() if isinstance(self.constraints, Mapping) else self.constraints
        clean = {}
        for site, status in items:
            j, k = site
            if j < 0 or k < 0:
                raise ValidationError(f"site {site} is outside the quadrant")
            if status not in (0, 1):
                raise ValidationError(f"status of {site} must be 0 or 1")
            if (j, k) in clean:
                raise ValidationError(f"site {site} constrained twice")
            clean[(int(j), int(k))] = int(status)
        object.__setattr__(self, "constraints", clean)

    @property
    def depth(self) -> int:
        return max((j + k for j, k in self.constraints), default=0)


def cylinder_probability(params: Params, boundary: Boundary, event,
                         n_max_enum: int = N_MAX_ENUM) -> float:
    if not isinstance(event, CylinderEvent):
        event = CylinderEvent(event)
    joint = triangle_enumeration(params, boundary, event.depth, n_max_enum)
    return joint.event_probability(event.constraints)
