"""Alias tables (Walker/Vose) for O(1) categorical sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from txembed import _rng


@nb.njit(cache=True)
def build_alias_into(p, prob_out, alias_out):
    """Fill ``prob_out``/``alias_out`` (length k) from a normalized vector ``p``.

    ``alias_out`` holds local indices. Columns that end up full alias to
    themselves.
    """
    k = p.shape[0]
    scaled = p * k
    small = np.empty(k, dtype=np.int64)
    large = np.empty(k, dtype=np.int64)
    ns = 0
    nl = 0
    for i in range(k):
        if scaled[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        nl -= 1
        g = large[nl]
        prob_out[s] = scaled[s]
        alias_out[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        if scaled[g] < 1.0:
            small[ns] = g
            ns += 1
        else:
            large[nl] = g
            nl += 1
    # leftovers are 1 up to rounding
    while nl > 0:
        nl -= 1
        prob_out[large[nl]] = 1.0
        alias_out[large[nl]] = large[nl]
    while ns > 0:
        ns -= 1
        prob_out[small[ns]] = 1.0
        alias_out[small[ns]] = small[ns]


@nb.njit(cache=True, inline="always")
def alias_draw(prob, alias, start, k, state):
    """Draw a local index in [0, k) from the table stored at ``[start, start+k)``."""
    i = _rng.randbelow(state, k)
    if _rng.uniform(state) < prob[start + i]:
        return i
    return alias[start + i]


@nb.njit(cache=True)
def _draw_many(prob, alias, n, state):
    out = np.empty(n, dtype=np.int64)
    k = prob.shape[0]
    for j in range(n):
        out[j] = alias_draw(prob, alias, 0, k, state)
    return out


@dataclass(frozen=True)
class AliasTable:
    """Standalone alias table over outcomes 0..k-1."""

    prob: np.ndarray
    alias: np.ndarray

    @classmethod
    def from_probs(cls, p) -> "AliasTable":
        p = np.asarray(p, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("need a non-empty 1-d probability vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and non-negative")
        total = p.sum()
        if total <= 0:
            raise ValueError("probabilities sum to zero")
        prob = np.empty_like(p)
        alias = np.empty(p.size, dtype=np.int64)
        build_alias_into(p / total, prob, alias)
        return cls(prob, alias)

    def __len__(self) -> int:
        return self.prob.size

    def expand(self) -> np.ndarray:
        """The exact categorical distribution the table samples."""
        return expand_alias(self.prob, self.alias)

    def sample(self, n: int, seed: int = 0) -> np.ndarray:
        return _draw_many(self.prob, self.alias, int(n), _rng.stream(seed))


def expand_alias(prob: np.ndarray, alias: np.ndarray) -> np.ndarray:
    k = prob.size
    out = prob.astype(np.float64).copy()
    np.add.at(out, alias, 1.0 - prob)
    return out / k
