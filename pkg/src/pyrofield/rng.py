"""Counter-based uniforms for the simulators.

Every uniform is a pure function of ``(seed, replica, n, j, stream)``: the
Philox4x64-10 block function is keyed by ``(seed, replica)`` and fed the
counter ``(j // 4 + 1, n, stream, 0)``; word ``j % 4`` of the output becomes a
53-bit double in ``[0, 1)``. This is bit-for-bit the sequence that
``numpy.random.Generator(Philox(key=[seed, replica], counter=[0, n, stream, 0])).random()``
produces, so numpy serves as a reference implementation in the tests.

No generator state is carried between draws, which is what makes results
independent of scheduling and lets coupled fields share site uniforms.
"""

import numpy as np
from numba import njit

STREAM_FIELD = 0
STREAM_ONEDIM = 1

_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(inline="always")
def _mulhilo(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    t = a_lo * b_lo
    u = a_hi * b_lo + (t >> _S32)
    w1 = (u & _MASK32) + a_lo * b_hi
    hi = a_hi * b_hi + (u >> _S32) + (w1 >> _S32)
    return hi, a * b


@njit(cache=True, nogil=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64 with 10 rounds; all arguments are ``uint64``."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@njit(inline="always")
def to_unit(x):
    return (x >> _S11) * _INV53


@njit(cache=True, nogil=True)
def site_uniform(seed, replica, n, j, stream):
    """Uniform for one site; convenient but recomputes the whole block."""
    block = np.uint64(j // 4 + 1)
    w = philox4x64(block, np.uint64(n), np.uint64(stream), np.uint64(0),
                   np.uint64(seed), np.uint64(replica))
    return to_unit(w[j % 4])


def uniforms(seed: int, replica: int, n: int, count: int, stream: int = STREAM_FIELD) -> np.ndarray:
    """First ``count`` uniforms of row ``n`` (sites ``j = 0..count-1``)."""
    out = np.empty(count)
    seed, replica = np.uint64(seed), np.uint64(replica)
    for j in range(count):
        out[j] = site_uniform(seed, replica, n, j, stream)
    return out


def reference_uniforms(seed: int, replica: int, n: int, count: int,
                       stream: int = STREAM_FIELD) -> np.ndarray:
    """Same values via numpy's Philox bit generator."""
    bg = np.random.Philox(key=np.array([seed, replica], dtype=np.uint64),
                          counter=np.array([0, n, stream, 0], dtype=np.uint64))
    return np.random.Generator(bg).random(count)
