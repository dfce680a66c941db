"""Per-trajectory random streams usable inside numba kernels.

Every trajectory owns a xoshiro256** state (four uint64 words).  Trajectory
``i`` of an ensemble with base seed ``b`` is seeded by::

    seed_i = splitmix64(b ^ splitmix64(i + GOLDEN))

and the four state words are the next four outputs of a splitmix64 stream
started at ``seed_i``.  Streams are therefore fixed by ``(b, i)`` alone,
independent of scheduling or thread count.
"""

from __future__ import annotations

import numba as nb
import numpy as np

__all__ = ["GOLDEN", "splitmix64", "mix_seed", "make_state", "next_u64", "uniform", "randbelow"]

GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 finalization step on a Python int (mod 2**64)."""
    z = (int(x) + GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix_seed(base_seed: int, index: int) -> int:
    """64-bit seed of trajectory ``index`` in an ensemble seeded by ``base_seed``."""
    return splitmix64((int(base_seed) & _MASK) ^ splitmix64(int(index) + GOLDEN))


def make_state(seed: int) -> np.ndarray:
    """xoshiro256** state seeded from a 64-bit integer."""
    s = np.empty(4, dtype=np.uint64)
    x = int(seed) & _MASK
    for k in range(4):
        x = (x + GOLDEN) & _MASK
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        s[k] = z ^ (z >> 31)
    if not s.any():
        s[0] = 1
    return s


@nb.njit(inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(nogil=True, cache=True)
def next_u64(s):
    """Advance the state in place and return the next 64-bit output."""
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@nb.njit(nogil=True, cache=True)
def uniform(s):
    """Double in [0, 1) with 53 random bits."""
    return np.float64(next_u64(s) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(nogil=True, cache=True)
def randbelow(s, n):
    """Integer in [0, n) for 0 < n < 2**32 by multiply-shift."""
    hi = next_u64(s) >> np.uint64(32)
    return np.int64((hi * np.uint64(n)) >> np.uint64(32))
