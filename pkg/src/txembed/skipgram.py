"""Skip-gram with negative sampling over walk corpora.

Each walk position ``i`` pairs its node (center) with every node at positions
``j != i`` inside ``|i - j| <= window``. A pair contributes
``-log s(u.v) - sum_neg log s(-u.v_neg)`` where ``u`` is the center's input
vector, ``v`` the context's output vector and ``s`` the logistic function.
Negatives come from corpus frequencies raised to ``noise_exponent``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numba as nb
import numpy as np

from txembed import _rng
from txembed.alias import AliasTable, alias_draw
from txembed.walker import WalkCorpus

REDRAW_ATTEMPTS = 8


class EmbeddingFormatError(ValueError):
    pass


class RowCountMismatch(EmbeddingFormatError):
    pass


@dataclass(frozen=True)
class EmbedConfig:
    dimension: int = 64
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    noise_exponent: float = 0.75
    seed: int = 0

    def __post_init__(self):
        if self.dimension < 1 or self.window < 1 or self.negatives < 1 or self.epochs < 1:
            raise ValueError("dimension, window, negatives and epochs must be >= 1")
        if not (self.learning_rate > 0 and self.min_learning_rate > 0):
            raise ValueError("learning rates must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class EmbeddingMatrix:
    ids: list[str]
    vectors: np.ndarray
    context: np.ndarray | None = field(default=None, repr=False)
    epoch_losses: list[float] = field(default_factory=list)
    objective_trace: list[float] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return self.vectors.shape

    def row(self, node_id: str) -> np.ndarray:
        return self.vectors[self.ids.index(node_id)]

    def rows(self, node_ids: Sequence[str]) -> np.ndarray:
        pos = {a: i for i, a in enumerate(self.ids)}
        return self.vectors[[pos[a] for a in node_ids]]


def _log_sigmoid(x: float) -> float:
    return -math.log1p(math.exp(-x)) if x >= 0 else x - math.log1p(math.exp(x))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def sgns_loss_and_grad(center, context, negatives):
    """Loss and exact gradients for one (center, context) pair.

    Returns ``(loss, grad_center, grad_context, grad_negatives)``.
    """
    u = np.asarray(center, dtype=np.float64)
    v = np.asarray(context, dtype=np.float64)
    neg = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if u.ndim != 1 or v.shape != u.shape or neg.shape[1] != u.shape[0]:
        raise ValueError("all vectors must share one dimension")
    x = float(u @ v)
    loss = -_log_sigmoid(x)
    g = _sigmoid(x) - 1.0
    grad_u = g * v
    grad_v = g * u
    grad_neg = np.empty_like(neg)
    for i, vn in enumerate(neg):
        xn = float(u @ vn)
        loss -= _log_sigmoid(-xn)
        s = _sigmoid(xn)
        grad_u = grad_u + s * vn
        grad_neg[i] = s * u
    return loss, grad_u, grad_v, grad_neg


@nb.njit(cache=True, inline="always")
def _sig(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@nb.njit(cache=True, inline="always")
def _nlogsig(x):
    if x >= 0:
        return math.log1p(math.exp(-x))
    return -x + math.log1p(math.exp(x))


@nb.njit(cache=True, fastmath=True)
def _pair_update(w_in, w_out, u, c, negs, n_neg, noise_p, noise_a, lr, state, grad,
                 redraws=REDRAW_ATTEMPTS):
    d = w_in.shape[1]
    for t in range(d):
        grad[t] = 0.0
    x = 0.0
    for t in range(d):
        x += w_in[u, t] * w_out[c, t]
    loss = _nlogsig(x)
    g = _sig(x) - 1.0
    for t in range(d):
        grad[t] += g * w_out[c, t]
        w_out[c, t] -= lr * g * w_in[u, t]
    k = noise_p.shape[0]
    for m in range(n_neg):
        if negs.shape[0] > 0:
            nn = negs[m]
        else:
            nn = alias_draw(noise_p, noise_a, 0, k, state)
            tries = 0
            while nn == c and tries < redraws:
                nn = alias_draw(noise_p, noise_a, 0, k, state)
                tries += 1
        x = 0.0
        for t in range(d):
            x += w_in[u, t] * w_out[nn, t]
        loss += _nlogsig(-x)
        s = _sig(x)
        for t in range(d):
            grad[t] += s * w_out[nn, t]
            w_out[nn, t] -= lr * s * w_in[u, t]
    for t in range(d):
        w_in[u, t] -= lr * grad[t]
    return loss


@nb.njit(cache=True)
def _train_range(walks, lengths, lo, hi, window, n_neg, w_in, w_out, noise_p, noise_a,
                 lr0, lr_min, done, total, stride, state):
    """Train on walks [lo, hi); returns (loss_sum, pairs_seen).

    The learning rate decays with ``done + stride * seen`` pairs; ``stride`` is
    the shard count when several shards advance the schedule concurrently.
    """
    grad = np.empty(w_in.shape[1])
    no_negs = np.empty(0, dtype=np.int64)
    loss = 0.0
    seen = 0
    for w in range(lo, hi):
        n = lengths[w]
        for i in range(n):
            u = walks[w, i]
            j0 = max(0, i - window)
            j1 = min(n - 1, i + window)
            for j in range(j0, j1 + 1):
                if j == i:
                    continue
                frac = (done + stride * seen) / total
                lr = lr0 - (lr0 - lr_min) * frac
                if lr < lr_min:
                    lr = lr_min
                loss += _pair_update(w_in, w_out, u, walks[w, j], no_negs, n_neg,
                                     noise_p, noise_a, lr, state, grad)
                seen += 1
    return loss, seen


@nb.njit(cache=True, parallel=True)
def _train_shards(walks, lengths, bounds, window, n_neg, w_in, w_out, noise_p, noise_a,
                  lr0, lr_min, done, total, seed, epoch):
    n_shards = bounds.shape[0] - 1
    losses = np.zeros(n_shards)
    for s in nb.prange(n_shards):
        state = np.empty(1, dtype=np.uint64)
        state[0] = _rng.derive(seed, epoch, s)
        loss, _ = _train_range(walks, lengths, bounds[s], bounds[s + 1], window, n_neg,
                               w_in, w_out, noise_p, noise_a, lr0, lr_min,
                               done, total, n_shards, state)
        losses[s] = loss
    return losses


@nb.njit(cache=True)
def _objective(walks, lengths, window, n_neg, w_in, w_out, noise_p, noise_a, state):
    d = w_in.shape[1]
    k = noise_p.shape[0]
    loss = 0.0
    for w in range(walks.shape[0]):
        n = lengths[w]
        for i in range(n):
            u = walks[w, i]
            for j in range(max(0, i - window), min(n - 1, i + window) + 1):
                if j == i:
                    continue
                c = walks[w, j]
                x = 0.0
                for t in range(d):
                    x += w_in[u, t] * w_out[c, t]
                loss += _nlogsig(x)
                for m in range(n_neg):
                    nn = alias_draw(noise_p, noise_a, 0, k, state)
                    tries = 0
                    while nn == c and tries < REDRAW_ATTEMPTS:
                        nn = alias_draw(noise_p, noise_a, 0, k, state)
                        tries += 1
                    x = 0.0
                    for t in range(d):
                        x += w_in[u, t] * w_out[nn, t]
                    loss += _nlogsig(-x)
    return loss


def objective(emb: "EmbeddingMatrix", corpus: WalkCorpus, cfg: EmbedConfig,
              eval_seed: int = 0) -> float:
    """Mean pair loss over ``corpus`` with negatives from a fixed stream (no updates)."""
    per = pair_count(corpus.lengths, cfg.window)
    if per == 0 or emb.context is None:
        return 0.0
    noise = noise_table(corpus, cfg.noise_exponent)
    state = _rng.stream(eval_seed, 1 << 20, 0)
    return _objective(np.ascontiguousarray(corpus.walks), np.ascontiguousarray(corpus.lengths),
                      cfg.window, cfg.negatives, emb.vectors, emb.context, noise.prob,
                      noise.alias, state) / per


def pair_count(lengths: np.ndarray, window: int) -> int:
    total = 0
    for n in np.unique(lengths):
        i = np.arange(n)
        per = np.minimum(i + window, n - 1) - np.maximum(i - window, 0)
        total += int(per.sum()) * int(np.count_nonzero(lengths == n))
    return total


def noise_table(corpus: WalkCorpus, exponent: float) -> AliasTable:
    counts = corpus.token_counts().astype(np.float64)
    return AliasTable.from_probs(counts ** exponent * (counts > 0))


def train(corpus: WalkCorpus, cfg: EmbedConfig, node_ids: Sequence[str] | None = None,
          threads: int = 1, track_objective: bool = False) -> EmbeddingMatrix:
    """Fit node vectors on ``corpus``. ``threads > 1`` trades determinism for speed.

    ``epoch_losses`` are the running training losses (fresh negatives each
    pair). With ``track_objective`` the full objective is also evaluated after
    every epoch against one fixed negative stream, which removes the sampling
    noise from epoch-to-epoch comparisons.
    """
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    n = corpus.num_nodes
    if node_ids is None:
        node_ids = [str(i) for i in range(n)]
    node_ids = list(node_ids)
    if len(node_ids) != n:
        raise ValueError(f"{len(node_ids)} node ids for a corpus over {n} nodes")
    valid = corpus.walks[corpus.walks >= 0]
    if valid.size and valid.max() >= n:
        raise ValueError("corpus references a node index outside the graph")

    d = cfg.dimension
    rng = np.random.default_rng(int(cfg.seed) & 0xFFFFFFFFFFFFFFFF)
    w_in = rng.uniform(-0.5 / d, 0.5 / d, size=(n, d))
    w_out = np.zeros((n, d))
    per_epoch = pair_count(corpus.lengths, cfg.window)
    losses: list[float] = []
    trace: list[float] = []
    if per_epoch == 0:
        return EmbeddingMatrix(node_ids, w_in, w_out, [0.0] * cfg.epochs)
    emb = EmbeddingMatrix(node_ids, w_in, w_out, losses, trace)

    noise = noise_table(corpus, cfg.noise_exponent)
    total = float(per_epoch * cfg.epochs)
    walks = np.ascontiguousarray(corpus.walks)
    lengths = np.ascontiguousarray(corpus.lengths)
    seed = _rng.as_u64(cfg.seed)
    for epoch in range(cfg.epochs):
        done = float(epoch * per_epoch)
        if threads <= 1:
            state = np.array([_rng.derive(seed, epoch, 0)], dtype=np.uint64)
            loss, _ = _train_range(walks, lengths, 0, len(corpus), cfg.window, cfg.negatives,
                                   w_in, w_out, noise.prob, noise.alias, cfg.learning_rate,
                                   cfg.min_learning_rate, done, total, 1, state)
        else:
            nb.set_num_threads(min(threads, nb.config.NUMBA_NUM_THREADS))
            bounds = np.linspace(0, len(corpus), threads + 1).astype(np.int64)
            loss = float(_train_shards(walks, lengths, bounds, cfg.window, cfg.negatives,
                                       w_in, w_out, noise.prob, noise.alias,
                                       cfg.learning_rate, cfg.min_learning_rate, done,
                                       total, seed, epoch).sum())
        losses.append(loss / per_epoch)
        if track_objective:
            trace.append(objective(emb, corpus, cfg, cfg.seed))
    return emb


def save_embeddings(emb: EmbeddingMatrix, path) -> None:
    n, d = emb.vectors.shape
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"{n} {d}\n")
        for node_id, row in zip(emb.ids, emb.vectors):
            fh.write(node_id + " " + " ".join(f"{x:.17g}" for x in row) + "\n")


def load_embeddings(path) -> EmbeddingMatrix:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise EmbeddingFormatError("missing header")
    head = lines[0].split()
    if len(head) != 2 or not all(h.isdigit() for h in head):
        raise EmbeddingFormatError(f"malformed header {lines[0]!r}")
    n, d = int(head[0]), int(head[1])
    body = lines[1:]
    if len(body) != n:
        raise RowCountMismatch(f"header declares {n} rows, found {len(body)}")
    ids, vecs = [], np.empty((n, d))
    for i, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != d + 1:
            raise EmbeddingFormatError(f"row {i + 2}: expected {d} values, got {len(parts) - 1}")
        ids.append(parts[0])
        try:
            vecs[i] = [float(x) for x in parts[1:]]
        except ValueError:
            raise EmbeddingFormatError(f"row {i + 2}: non-numeric value") from None
    return EmbeddingMatrix(ids, vecs)
