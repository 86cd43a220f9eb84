"""One-dimensional chain: tree ``j`` burns with probability ``p`` if tree
``j - 1`` burnt and never otherwise, with tree ``-1`` always burnt.

``Y`` counts burnt trees including the one at ``-1``, so ``Y >= 1`` and
``P{Y >= n} = p ** (n - 1)``: a geometric law on ``{1, 2, ...}`` with success
probability ``1 - p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DivergentMoments, ValidationError
from .rng import STREAM_ONEDIM, philox4x64, to_unit, uniforms


@dataclass(frozen=True)
class OneDParams:
    p: float

    def __post_init__(self):
        p = self.p
        if isinstance(p, bool) or not isinstance(p, (int, float, np.floating, np.integer)):
            raise ValidationError(f"p must be a real number, got {p!r}")
        if not (math.isfinite(p) and 0.0 <= p <= 1.0):
            raise ValidationError(f"p must satisfy 0 <= p <= 1, got {p!r}")
        object.__setattr__(self, "p", float(p))


def marginal_burn(params: OneDParams, j: int) -> float:
    if j < 0:
        raise ValidationError("tree index must be >= 0")
    return params.p ** (j + 1)


def y_tail(params: OneDParams, n: int) -> float:
    """P{Y >= n} for n >= 1."""
    if n < 1:
        raise ValidationError("tail index must be >= 1")
    return params.p ** (n - 1)


def y_moments(params: OneDParams) -> tuple[float, float]:
    p = params.p
    if p >= 1.0:
        raise DivergentMoments("p = 1 burns the whole chain; Y has no finite moments")
    return 1.0 / (1.0 - p), p / (1.0 - p) ** 2


@njit(cache=True, nogil=True)
def _walk(p, seed, replicas, out):
    stream = np.uint64(STREAM_ONEDIM)
    zero = np.uint64(0)
    for r in range(replicas):
        key1 = np.uint64(r)
        j = 0
        while True:
            w = philox4x64(np.uint64(j // 4 + 1), zero, stream, zero, seed, key1)
            lane = j % 4
            u = to_unit(w[0] if lane == 0 else w[1] if lane == 1 else w[2] if lane == 2 else w[3])
            if not u < p:
                break
            j += 1
        out[r] = 1 + j


@dataclass
class EmpiricalY:
    samples: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def var(self) -> float:
        return float(self.samples.var(ddof=1)) if self.samples.size > 1 else 0.0

    def tail(self, n: int) -> float:
        return float(np.mean(self.samples >= n))


def simulate_1d(params: OneDParams, replicas: int, seed: int) -> EmpiricalY:
    """Sample ``Y`` per replica by walking the chain until a tree survives.

    Replica ``r`` uses uniform ``j`` of row 0 in the one-dimensional stream
    keyed by ``(seed, r)`` for tree ``j``.
    """
    if params.p >= 1.0:
        raise DivergentMoments("p = 1 never stops burning; simulation would not terminate")
    if replicas < 1:
        raise ValidationError("replicas must be >= 1")
    out = np.empty(replicas, dtype=np.int64)
    _walk(params.p, np.uint64(seed), replicas, out)
    return EmpiricalY(out)


def simulate_1d_path(params: OneDParams, length: int, seed: int, replica: int = 0) -> np.ndarray:
    """Statuses ``S(0..length-1)`` of one chain, stepping the conditional law
    tree by tree (a tree next to an unburnt one stays unburnt)."""
    u = uniforms(seed, replica, 0, length, STREAM_ONEDIM)
    s = np.zeros(length, dtype=np.uint8)
    prev = 1
    for j in range(length):
        s[j] = 1 if prev == 1 and u[j] < params.p else 0
        prev = s[j]
    return s


def y_fourth_central_moment(params: OneDParams) -> float:
    """E[(Y - EY)^4]; sets the standard error of the sample variance."""
    p = params.p
    if p >= 1.0:
        raise DivergentMoments("p = 1 has no finite moments")
    return (9.0 * p * p + p * (1.0 - p) ** 2) / (1.0 - p) ** 4


def _z(observed: float, expected: float, se: float):
    if se > 0:
        return (observed - expected) / se
    return 0.0 if observed == expected else None


def compare_1d(params: OneDParams, sample: EmpiricalY, max_tail: int = 20) -> dict:
    """Analytic vs empirical mean, variance and tails ``P{Y >= n}``, ``n <= max_tail``,
    with z-scores against the sampling standard errors (``None`` when the
    standard error is 0 and the values differ)."""
    mean, var = y_moments(params)
    N = sample.samples.size
    mu4 = y_fourth_central_moment(params)
    tails = {str(n): y_tail(params, n) for n in range(1, max_tail + 1)}
    emp_tails = {str(n): sample.tail(n) for n in range(1, max_tail + 1)}
    return {
        "analytic": {"mean": mean, "var": var, "tails": tails},
        "empirical": {"mean": sample.mean, "var": sample.var, "tails": emp_tails},
        "z_scores": {
            "mean": _z(sample.mean, mean, math.sqrt(var / N)),
            "var": _z(sample.var, var, math.sqrt(max(mu4 - var * var, 0.0) / N)),
            "tails": {n: _z(emp_tails[n], t, math.sqrt(t * (1.0 - t) / N))
                      for n, t in tails.items()},
        },
    }
