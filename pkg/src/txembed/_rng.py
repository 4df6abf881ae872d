"""SplitMix64 streams usable from numba kernels.

Every random stream in the walk and training kernels is a single uint64 word
advanced by SplitMix64. Streams are derived by hashing (seed, a, b) so that a
walk's randomness depends only on its own coordinates, never on scheduling.
"""

from __future__ import annotations

import numba as nb
import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


def as_u64(seed: int) -> np.uint64:
    """Fold an arbitrary Python int (possibly negative) into a uint64 seed."""
    return np.uint64(int(seed) & _MASK64)


@nb.njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@nb.njit(cache=True)
def derive(seed, a, b):
    """Stream state for coordinates (a, b) under ``seed``; a, b >= 0."""
    z = mix64(seed + _GOLDEN)
    z = mix64(z ^ (np.uint64(a) * _GOLDEN + np.uint64(1)))
    return mix64(z ^ (np.uint64(b) + _GOLDEN))


@nb.njit(cache=True, inline="always")
def next_u64(state):
    state[0] += _GOLDEN
    return mix64(state[0])


@nb.njit(cache=True, inline="always")
def uniform(state):
    """Double in [0, 1) with 53 random bits."""
    return np.float64(next_u64(state) >> _S11) * _INV53


@nb.njit(cache=True, inline="always")
def randbelow(state, k):
    i = np.int64(uniform(state) * k)
    return i if i < k else k - 1


def stream(seed: int, a: int = 0, b: int = 0) -> np.ndarray:
    """A fresh one-word state array for use with the kernels above."""
    return np.array([derive(as_u64(seed), a, b)], dtype=np.uint64)
