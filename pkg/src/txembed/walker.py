"""Biased random walks over a :class:`~txembed.txgraph.TxGraph`.

Strategies
----------
``trans2vec``
    First-order walk with unnormalized weight ``A(u,x)**alpha * T(u,x)**(1-alpha)``
    where ``A`` is the aggregated amount and ``T`` the time rank of the edge.
``amount_only`` / ``time_only``
    The ``alpha = 1`` and ``alpha = 0`` ends of the same family.
``deepwalk``
    Uniform over neighbors.
``node2vec``
    Second-order walk with return parameter ``p`` and in-out parameter ``q``
    on the unweighted graph.

Neighbors that share a raw timestamp inside one neighborhood share the mean
of their time ranks. Without ties this is exactly the rank; with all-equal
timestamps (unit-attribute graphs) the time weights become uniform.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numba as nb
import numpy as np

from txembed import _rng
from txembed.alias import alias_draw, build_alias_into
from txembed.txgraph import TxGraph

TRANS2VEC = "trans2vec"
AMOUNT_ONLY = "amount_only"
TIME_ONLY = "time_only"
DEEPWALK = "deepwalk"
NODE2VEC = "node2vec"
STRATEGIES = (TRANS2VEC, AMOUNT_ONLY, TIME_ONLY, DEEPWALK, NODE2VEC)


class DeadEnd(LookupError):
    """Raised when transition probabilities are requested for a node without neighbors."""


@dataclass(frozen=True)
class WalkConfig:
    strategy: str = TRANS2VEC
    alpha: float = 0.5
    p: float = 0.25
    q: float = 0.75
    walks_per_node: int = 20
    walk_length: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be positive")
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")
        if self.walk_length < 0:
            raise ValueError("walk_length must be >= 0")

    @property
    def effective_alpha(self) -> float:
        if self.strategy == AMOUNT_ONLY:
            return 1.0
        if self.strategy == TIME_ONLY:
            return 0.0
        return self.alpha

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# probability kernels


@nb.njit(cache=True)
def _segment_probs(amount, tval, alpha, uniform, out):
    k = amount.shape[0]
    if uniform:
        for i in range(k):
            out[i] = 1.0
    else:
        any_amount = False
        for i in range(k):
            if amount[i] > 0.0:
                any_amount = True
                break
        bad = False
        for i in range(k):
            a = amount[i] if any_amount else 1.0
            w = a ** alpha * tval[i] ** (1.0 - alpha)
            out[i] = w
            if not np.isfinite(w) or (w == 0.0 and a > 0.0):
                bad = True
        if bad:
            # log space; only reached on under/overflow
            top = -np.inf
            for i in range(k):
                a = amount[i] if any_amount else 1.0
                la = -np.inf if a == 0.0 else math.log(a)
                lw = 0.0
                if alpha > 0.0:
                    lw += alpha * la
                if alpha < 1.0:
                    lw += (1.0 - alpha) * math.log(tval[i])
                out[i] = lw
                if lw > top:
                    top = lw
            for i in range(k):
                out[i] = math.exp(out[i] - top)
    top = 0.0
    for i in range(k):
        if out[i] > top:
            top = out[i]
    if not (top > 0.0) or not np.isfinite(top):
        for i in range(k):
            out[i] = 1.0
        top = 1.0
    total = 0.0
    for i in range(k):
        out[i] = out[i] / top
        total += out[i]
    for i in range(k):
        out[i] = out[i] / total


@nb.njit(cache=True)
def _tie_mean_ranks(indptr, ranks, stamps):
    """Per-entry time weight: rank averaged over same-timestamp neighbors."""
    out = ranks.astype(np.float64)
    n = indptr.shape[0] - 1
    for u in range(n):
        s, e = indptr[u], indptr[u + 1]
        if e - s < 2:
            continue
        order = np.argsort(stamps[s:e], kind="mergesort")
        i = 0
        while i < e - s:
            j = i + 1
            ts = stamps[s + order[i]]
            while j < e - s and stamps[s + order[j]] == ts:
                j += 1
            if j - i > 1:
                acc = 0.0
                for m in range(i, j):
                    acc += ranks[s + order[m]]
                acc /= j - i
                for m in range(i, j):
                    out[s + order[m]] = acc
            i = j
    return out


def time_weights(g: TxGraph) -> np.ndarray:
    """Time weight for every adjacency entry of ``g`` (tie-averaged ranks)."""
    return _tie_mean_ranks(g.indptr, g.nbr_rank, g.nbr_timestamp)


def _node_probs(g: TxGraph, u: int, alpha: float, uniform: bool) -> np.ndarray:
    g._check(u)
    s, e = int(g.indptr[u]), int(g.indptr[u + 1])
    if e == s:
        raise DeadEnd(u)
    tval = _tie_mean_ranks(np.array([0, e - s], dtype=np.int64),
                           g.nbr_rank[s:e], g.nbr_timestamp[s:e])
    out = np.empty(e - s)
    _segment_probs(g.nbr_amount[s:e], tval, float(alpha), uniform, out)
    return out


def amount_probs(g: TxGraph, u: int) -> np.ndarray:
    """Amount-proportional transition probabilities from ``u`` (uniform if all amounts are zero)."""
    return _node_probs(g, u, 1.0, False)


def time_probs(g: TxGraph, u: int) -> np.ndarray:
    """Time-rank-proportional transition probabilities from ``u``."""
    return _node_probs(g, u, 0.0, False)


def blended_probs(g: TxGraph, u: int, alpha: float) -> np.ndarray:
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must lie in [0, 1]")
    return _node_probs(g, u, alpha, False)


def uniform_probs(g: TxGraph, u: int) -> np.ndarray:
    return _node_probs(g, u, 1.0, True)


@nb.njit(cache=True)
def _first_order(indptr, amount, tval, alpha, uniform):
    m = amount.shape[0]
    prob = np.empty(m)
    aprob = np.empty(m)
    aidx = np.empty(m, dtype=np.int64)
    for u in range(indptr.shape[0] - 1):
        s, e = indptr[u], indptr[u + 1]
        if e == s:
            continue
        _segment_probs(amount[s:e], tval[s:e], alpha, uniform, prob[s:e])
        build_alias_into(prob[s:e], aprob[s:e], aidx[s:e])
    return prob, aprob, aidx


@nb.njit(cache=True)
def _second_order(indptr, nbr, p, q):
    deg = indptr[1:] - indptr[:-1]
    m = nbr.shape[0]
    eptr = np.zeros(m + 1, dtype=np.int64)
    for e in range(m):
        eptr[e + 1] = eptr[e] + deg[nbr[e]]
    total = eptr[m]
    prob = np.empty(total)
    aprob = np.empty(total)
    aidx = np.empty(total, dtype=np.int64)
    n = indptr.shape[0] - 1
    for t in range(n):
        ts, te = indptr[t], indptr[t + 1]
        tn = nbr[ts:te]
        for e in range(ts, te):
            v = nbr[e]
            vs, ve = indptr[v], indptr[v + 1]
            if ve == vs:
                continue
            o = eptr[e]
            k = ve - vs
            w = prob[o:o + k]
            acc = 0.0
            for j in range(k):
                x = nbr[vs + j]
                if x == t:
                    w[j] = 1.0 / p
                else:
                    pos = np.searchsorted(tn, x)
                    if pos < tn.shape[0] and tn[pos] == x:
                        w[j] = 1.0
                    else:
                        w[j] = 1.0 / q
                acc += w[j]
            for j in range(k):
                w[j] = w[j] / acc
            build_alias_into(w, aprob[o:o + k], aidx[o:o + k])
    return eptr, prob, aprob, aidx


@dataclass(frozen=True, eq=False)
class TransitionTable:
    """Precomputed per-node distributions and their alias tables (CSR-aligned with the graph)."""

    strategy: str
    indptr: np.ndarray
    nbr: np.ndarray
    prob: np.ndarray
    alias_prob: np.ndarray
    alias_idx: np.ndarray
    graph_fingerprint: str
    # second order (node2vec) only; block for adjacency entry e is
    # [edge_ptr[e], edge_ptr[e+1]) over the neighbors of nbr[e]
    edge_ptr: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64))
    prob2: np.ndarray = field(default_factory=lambda: np.zeros(0))
    alias_prob2: np.ndarray = field(default_factory=lambda: np.zeros(0))
    alias_idx2: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def second_order(self) -> bool:
        return self.strategy == NODE2VEC

    def probs(self, u: int) -> np.ndarray:
        return self.prob[self.indptr[u]:self.indptr[u + 1]]

    def alias(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.indptr[u], self.indptr[u + 1]
        return self.alias_prob[s:e], self.alias_idx[s:e]

    def edge_probs(self, prev: int, cur: int) -> np.ndarray:
        """Second-order distribution over neighbors of ``cur`` after arriving from ``prev``."""
        if not self.second_order:
            raise ValueError("table is first-order")
        s, e = self.indptr[prev], self.indptr[prev + 1]
        pos = s + np.searchsorted(self.nbr[s:e], cur)
        if pos >= e or self.nbr[pos] != cur:
            raise KeyError((prev, cur))
        return self.prob2[self.edge_ptr[pos]:self.edge_ptr[pos + 1]]


def precompute_transitions(g: TxGraph, cfg: WalkConfig) -> TransitionTable:
    uniform = cfg.strategy in (DEEPWALK, NODE2VEC)
    tval = time_weights(g)
    prob, aprob, aidx = _first_order(g.indptr, g.nbr_amount, tval,
                                     float(cfg.effective_alpha), uniform)
    extra = {}
    if cfg.strategy == NODE2VEC:
        eptr, p2, ap2, ai2 = _second_order(g.indptr, g.nbr, float(cfg.p), float(cfg.q))
        extra = dict(edge_ptr=eptr, prob2=p2, alias_prob2=ap2, alias_idx2=ai2)
    return TransitionTable(cfg.strategy, g.indptr, g.nbr, prob, aprob, aidx,
                           g.fingerprint(), **extra)


# --------------------------------------------------------------------------
# walking


@nb.njit(cache=True)
def _walk_into(indptr, nbr, aprob, aidx, eptr, aprob2, aidx2, second,
               u, length, state, out):
    """Write one walk starting at ``u`` into ``out``; returns its node count."""
    out[0] = u
    cur = u
    prev_e = -1
    for step in range(length):
        s = indptr[cur]
        k = indptr[cur + 1] - s
        if k == 0:
            return step + 1
        if second and prev_e >= 0:
            j = alias_draw(aprob2, aidx2, eptr[prev_e], k, state)
        else:
            j = alias_draw(aprob, aidx, s, k, state)
        prev_e = s + j
        cur = nbr[prev_e]
        out[step + 1] = cur
    return length + 1


@nb.njit(cache=True)
def _walks_serial(indptr, nbr, aprob, aidx, eptr, aprob2, aidx2, second,
                  starts, iters, length, seed, out, lengths):
    for w in range(starts.shape[0]):
        state = np.empty(1, dtype=np.uint64)
        state[0] = _rng.derive(seed, iters[w], starts[w])
        lengths[w] = _walk_into(indptr, nbr, aprob, aidx, eptr, aprob2, aidx2, second,
                                starts[w], length, state, out[w])


@nb.njit(cache=True, parallel=True)
def _walks_parallel(indptr, nbr, aprob, aidx, eptr, aprob2, aidx2, second,
                    starts, iters, length, seed, out, lengths):
    for w in nb.prange(starts.shape[0]):
        state = np.empty(1, dtype=np.uint64)
        state[0] = _rng.derive(seed, iters[w], starts[w])
        lengths[w] = _walk_into(indptr, nbr, aprob, aidx, eptr, aprob2, aidx2, second,
                                starts[w], length, state, out[w])


def _kernel_args(t: TransitionTable):
    return (t.indptr, t.nbr, t.alias_prob, t.alias_idx, t.edge_ptr,
            t.alias_prob2, t.alias_idx2, t.second_order)


def walk(g: TxGraph, table: TransitionTable, u: int, length: int, rng) -> list[int]:
    """One walk of up to ``length`` steps from ``u``.

    ``rng`` is either an int seed or a one-word stream from :func:`txembed._rng.stream`;
    a stream is advanced in place.
    """
    g._check(u)
    if length < 0:
        raise ValueError("length must be >= 0")
    state = _rng.stream(rng) if isinstance(rng, (int, np.integer)) else rng
    out = np.full(length + 1, -1, dtype=np.int64)
    n = _walk_into(*_kernel_args(table), np.int64(u), np.int64(length), state, out)
    return out[:n].tolist()


@dataclass(eq=False)
class WalkCorpus:
    """Walks stored as a ``-1``-padded matrix plus per-walk lengths."""

    walks: np.ndarray
    lengths: np.ndarray
    config: WalkConfig
    graph_fingerprint: str
    num_nodes: int

    def __len__(self) -> int:
        return int(self.walks.shape[0])

    def __iter__(self) -> Iterator[list[int]]:
        for row, n in zip(self.walks, self.lengths):
            yield row[:n].tolist()

    def token_counts(self) -> np.ndarray:
        flat = self.walks[self.walks >= 0]
        return np.bincount(flat, minlength=self.num_nodes)

    def save(self, path, node_ids=None) -> None:
        """One walk per line, space-separated; header comments record config and fingerprint."""
        with Path(path).open("w", encoding="utf-8") as fh:
            cfg = " ".join(f"{k}={v}" for k, v in self.config.to_dict().items())
            fh.write(f"# config {cfg}\n# graph {self.graph_fingerprint} nodes={self.num_nodes}\n")
            for w in self:
                fh.write(" ".join(str(node_ids[x]) if node_ids is not None else str(x)
                                  for x in w) + "\n")

    @classmethod
    def load(cls, path, num_nodes: int | None = None) -> "WalkCorpus":
        cfg, fp, n_nodes, rows = {}, "", num_nodes, []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.startswith("# config "):
                for kv in line[len("# config "):].split():
                    k, v = kv.split("=", 1)
                    cfg[k] = v
            elif line.startswith("# graph "):
                parts = line.split()
                fp = parts[2]
                if n_nodes is None:
                    n_nodes = int(parts[3].split("=", 1)[1])
            elif line.strip():
                rows.append([int(x) for x in line.split()])
        types = {"strategy": str, "alpha": float, "p": float, "q": float,
                 "walks_per_node": int, "walk_length": int, "seed": int}
        config = WalkConfig(**{k: types[k](v) for k, v in cfg.items() if k in types})
        width = max((len(r) for r in rows), default=1)
        walks = np.full((len(rows), width), -1, dtype=np.int64)
        for i, r in enumerate(rows):
            walks[i, :len(r)] = r
        lengths = np.array([len(r) for r in rows], dtype=np.int64)
        return cls(walks, lengths, config, fp, int(n_nodes or 0))


def visit_orders(num_nodes: int, walks_per_node: int, seed: int) -> np.ndarray:
    """Seeded per-iteration shuffles of the node set, shape (r, |V|)."""
    orders = np.empty((walks_per_node, num_nodes), dtype=np.int64)
    for it in range(walks_per_node):
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, int(seed) >> 32 & 0xFFFFFFFF, it])
        orders[it] = rng.permutation(num_nodes)
    return orders


def generate_corpus(g: TxGraph, cfg: WalkConfig, table: TransitionTable | None = None,
                    threads: int = 1) -> WalkCorpus:
    """``r`` walks per node; walk ``(iteration, node)`` has its own random stream."""
    if table is None:
        table = precompute_transitions(g, cfg)
    elif table.graph_fingerprint != g.fingerprint():
        raise ValueError("transition table was built for a different graph")
    n = g.num_nodes
    starts = visit_orders(n, cfg.walks_per_node, cfg.seed).ravel()
    iters = np.repeat(np.arange(cfg.walks_per_node, dtype=np.int64), n)
    out = np.full((starts.size, cfg.walk_length + 1), -1, dtype=np.int64)
    lengths = np.empty(starts.size, dtype=np.int64)
    kernel = _walks_serial if threads <= 1 else _walks_parallel
    if threads > 1:
        nb.set_num_threads(min(threads, nb.config.NUMBA_NUM_THREADS))
    kernel(*_kernel_args(table), starts, iters, np.int64(cfg.walk_length),
           _rng.as_u64(cfg.seed), out, lengths)
    return WalkCorpus(out, lengths, cfg, table.graph_fingerprint, n)


def with_strategy(cfg: WalkConfig, strategy: str) -> WalkConfig:
    return replace(cfg, strategy=strategy)
