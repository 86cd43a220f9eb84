"""Parameters, ignition boundary and the local burn kernel.

Sites are indexed ``(j, k)`` with ``j, k >= 0``. Anti-diagonal ``n`` holds the
``n + 1`` sites ``(j, n - j)``; entry ``j`` of a diagonal is the status of
``(j, n - j)``. A site burns with a probability that depends only on its left
neighbour ``(j - 1, k)`` and its bottom neighbour ``(j, k - 1)``. The
neighbours of sites on the axes are the fixed boundary statuses
``S(-1, k) = [k in fire_y]`` and ``S(j, -1) = [j in fire_x]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ConstraintViolation, ValidationError


@dataclass(frozen=True)
class Params:
    """Burn probabilities: ``alpha`` (left neighbour burnt only), ``beta``
    (bottom neighbour burnt only) and ``gamma`` (both burnt).

    Construction enforces ``0 <= alpha, beta <= gamma <= min(1, alpha + beta)``
    exactly, with no floating-point slack.
    """

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)):
                raise ValidationError(f"{name} must be a real number, got {v!r}")
            if not math.isfinite(v):
                raise ValidationError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        a, b, g = self.alpha, self.beta, self.gamma
        checks = (
            ("0 <= alpha", 0.0 <= a, f"alpha={a!r}"),
            ("0 <= beta", 0.0 <= b, f"beta={b!r}"),
            ("alpha <= gamma", a <= g, f"alpha={a!r}, gamma={g!r}"),
            ("beta <= gamma", b <= g, f"beta={b!r}, gamma={g!r}"),
            ("gamma <= 1", g <= 1.0, f"gamma={g!r}"),
            ("gamma <= alpha + beta", g <= a + b, f"gamma={g!r}, alpha+beta={a + b!r}"),
        )
        for inequality, ok, detail in checks:
            if not ok:
                raise ConstraintViolation(inequality, detail)

    def table(self) -> np.ndarray:
        """Kernel as a 2x2 array indexed ``[left, bottom]``."""
        return np.array([[0.0, self.beta], [self.alpha, self.gamma]])

    def dominated_by(self, other: Params) -> bool:
        return (self.alpha <= other.alpha and self.beta <= other.beta
                and self.gamma <= other.gamma)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma}


def validate_params(alpha, beta, gamma) -> Params:
    return Params(alpha, beta, gamma)


def _index_set(values: Iterable[int], name: str) -> frozenset:
    out = set()
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise ValidationError(f"{name} entries must be integers, got {v!r}")
        if v < 0:
            raise ValidationError(f"{name} entries must be nonnegative, got {v}")
        out.add(int(v))
    return frozenset(out)


@dataclass(frozen=True)
class Boundary:
    """Finite ignition sets: ``j in fire_x`` sets ``S(j, -1) = 1`` and
    ``k in fire_y`` sets ``S(-1, k) = 1``; every other boundary site is 0."""

    fire_x: frozenset = field(default_factory=lambda: frozenset({0}))
    fire_y: frozenset = field(default_factory=lambda: frozenset({0}))

    def __post_init__(self):
        object.__setattr__(self, "fire_x", _index_set(self.fire_x, "fire_x"))
        object.__setattr__(self, "fire_y", _index_set(self.fire_y, "fire_y"))

    @classmethod
    def delta(cls) -> Boundary:
        return cls(frozenset({0}), frozenset({0}))

    @classmethod
    def empty(cls) -> Boundary:
        return cls(frozenset(), frozenset())

    @classmethod
    def parse(cls, fire_x: str, fire_y: str) -> Boundary:
        """Build from comma-separated index lists such as ``"0,3,7"``."""
        return cls(parse_index_list(fire_x, "fire-x"), parse_index_list(fire_y, "fire-y"))

    @property
    def max_ignition(self) -> int:
        both = self.fire_x | self.fire_y
        return max(both) if both else -1

    def left_edge(self, k: int) -> int:
        """Status of ``S(-1, k)``."""
        return int(k in self.fire_y)

    def bottom_edge(self, j: int) -> int:
        """Status of ``S(j, -1)``."""
        return int(j in self.fire_x)

    def issubset(self, other: Boundary) -> bool:
        return self.fire_x <= other.fire_x and self.fire_y <= other.fire_y

    def masks(self, length: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Dense 0/1 lookup arrays for ``fire_x`` and ``fire_y``."""
        if length is None:
            length = self.max_ignition + 1
        fx = np.zeros(length, dtype=np.uint8)
        fy = np.zeros(length, dtype=np.uint8)
        for j in self.fire_x:
            fx[j] = 1
        for k in self.fire_y:
            fy[k] = 1
        return fx, fy

    def to_dict(self) -> dict:
        return {"fire_x": sorted(self.fire_x), "fire_y": sorted(self.fire_y)}

    def format(self) -> tuple[str, str]:
        return (",".join(map(str, sorted(self.fire_x))),
                ",".join(map(str, sorted(self.fire_y))))


def parse_index_list(text: str, name: str = "indices") -> frozenset:
    text = text.strip()
    if not text:
        return frozenset()
    try:
        values = [int(tok) for tok in text.split(",")]
    except ValueError:
        raise ValidationError(f"--{name} expects comma-separated integers, got {text!r}") from None
    return _index_set(values, name)


class NeighborPair(NamedTuple):
    left: int
    bottom: int


@dataclass(frozen=True)
class DiagonalState:
    n: int
    bits: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if self.n < 0 or len(bits) != self.n + 1:
            raise ValidationError(f"diagonal {self.n} needs {self.n + 1} statuses, got {len(bits)}")
        if any(b not in (0, 1) for b in bits):
            raise ValidationError("statuses must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_index(cls, n: int, index: int) -> DiagonalState:
        """Decode a configuration index (bit ``j`` is site ``j``)."""
        return cls(n, tuple((index >> j) & 1 for j in range(n + 1)))

    @property
    def y(self) -> int:
        return sum(self.bits)

    @property
    def index(self) -> int:
        return sum(b << j for j, b in enumerate(self.bits))


def kernel(params: Params, nb: NeighborPair) -> float:
    left, bottom = nb
    if left and bottom:
        return params.gamma
    if left:
        return params.alpha
    if bottom:
        return params.beta
    return 0.0


def neighbor_statuses(boundary: Boundary, prev: DiagonalState, j: int) -> NeighborPair:
    """Neighbours of site ``(j, n + 1 - j)`` given diagonal ``n``."""
    n = prev.n
    if not 0 <= j <= n + 1:
        raise IndexError(f"site {j} is not on diagonal {n + 1}")
    left = prev.bits[j - 1] if j >= 1 else boundary.left_edge(n + 1)
    bottom = prev.bits[j] if j <= n else boundary.bottom_edge(n + 1)
    return NeighborPair(left, bottom)


def diagonal0_neighbors(boundary: Boundary) -> NeighborPair:
    return NeighborPair(boundary.left_edge(0), boundary.bottom_edge(0))


def random_params(rng: np.random.Generator) -> Params:
    """Draw a valid triple: alpha, beta uniform, gamma uniform on its allowed range."""
    alpha, beta = rng.random(2)
    low, high = max(alpha, beta), min(1.0, alpha + beta)
    gamma = min(high, low + (high - low) * rng.random())
    return Params(float(alpha), float(beta), float(gamma))
