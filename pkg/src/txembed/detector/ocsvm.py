"""One-class SVM (nu formulation) solved by pairwise coordinate descent.

The dual is::

    min_a  1/2 a^T K a   s.t.  0 <= a_i <= 1/(nu n),  sum_i a_i = 1

Each step picks the maximal violating pair (``i`` that can grow with the
smallest gradient, ``j`` that can shrink with the largest) and moves mass
from ``j`` to ``i`` along the exact line minimizer, clipped to the box.
"""

from __future__ import annotations

import json
import logging
import warnings
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

MODEL_VERSION = 1
DEFAULT_TOL = 1e-6
CACHE_ROWS = 1024


@dataclass(frozen=True)
class Kernel:
    kind: str = "rbf"
    gamma: float | None = None  # None: 1 / n_features

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")

    def resolved(self, n_features: int) -> "Kernel":
        if self.kind == "rbf" and self.gamma is None:
            return Kernel("rbf", 1.0 / n_features)
        return self

    def __call__(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        if self.kind == "linear":
            return a @ b.T
        sq = (np.einsum("ij,ij->i", a, a)[:, None] + np.einsum("ij,ij->i", b, b)[None, :]
              - 2.0 * (a @ b.T))
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-self.gamma * sq)


class KernelCache:
    """LRU cache of kernel rows ``K(x_i, X)``."""

    def __init__(self, x: np.ndarray, kernel: Kernel, capacity: int = CACHE_ROWS):
        self.x = x
        self.kernel = kernel
        self.capacity = capacity
        self.rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self.diag = np.ones(len(x)) if kernel.kind == "rbf" else np.einsum("ij,ij->i", x, x)
        self.misses = 0

    def row(self, i: int) -> np.ndarray:
        r = self.rows.get(i)
        if r is not None:
            self.rows.move_to_end(i)
            return r
        self.misses += 1
        r = self.kernel(self.x[i], self.x)[0]
        self.rows[i] = r
        if len(self.rows) > self.capacity:
            self.rows.popitem(last=False)
        return r


@dataclass(frozen=True, eq=False)
class OcsvmModel:
    support_vectors: np.ndarray
    alpha: np.ndarray
    support: np.ndarray  # indices into the training matrix
    rho: float
    kernel: Kernel
    nu: float
    n_train: int
    max_violation: float = 0.0
    iterations: int = 0

    @property
    def upper(self) -> float:
        return 1.0 / (self.nu * self.n_train)

    @property
    def n_features(self) -> int:
        return int(self.support_vectors.shape[1])

    def decision_function(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        return self.kernel(x, self.support_vectors) @ self.alpha - self.rho

    def predict(self, x) -> np.ndarray:
        return np.where(self.decision_function(x) >= 0.0, 1, -1)

    def dual_objective(self) -> float:
        k = self.kernel(self.support_vectors, self.support_vectors)
        return 0.5 * float(self.alpha @ k @ self.alpha)

    def save(self, path) -> None:
        meta = dict(version=MODEL_VERSION, kernel=self.kernel.kind, gamma=self.kernel.gamma,
                    nu=self.nu, n_train=self.n_train, rho=self.rho,
                    max_violation=self.max_violation, iterations=self.iterations)
        with Path(path).open("wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)),
                     support_vectors=self.support_vectors, alpha=self.alpha,
                     support=self.support)

    @classmethod
    def load(cls, path) -> "OcsvmModel":
        with np.load(Path(path), allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("version") != MODEL_VERSION:
                raise ValueError(f"unsupported model version {meta.get('version')}")
            return cls(z["support_vectors"], z["alpha"], z["support"], float(meta["rho"]),
                       Kernel(meta["kernel"], meta["gamma"]), float(meta["nu"]),
                       int(meta["n_train"]), float(meta["max_violation"]),
                       int(meta["iterations"]))


@dataclass(frozen=True)
class Prediction:
    node_id: str
    score: float
    label: int


def _initial_alpha(n: int, upper: float) -> np.ndarray:
    alpha = np.zeros(n)
    full = min(n, int(np.floor(1.0 / upper + 1e-12)))
    alpha[:full] = upper
    rest = 1.0 - full * upper
    if full < n and rest > 0:
        alpha[full] = rest
    return alpha


def max_violation(alpha: np.ndarray, grad: np.ndarray, upper: float) -> float:
    up = alpha < upper
    low = alpha > 0
    if not up.any() or not low.any():
        return 0.0
    return float(max(grad[low].max() - grad[up].min(), 0.0))


def ocsvm_fit(x, nu: float = 0.1, kernel: Kernel | str = "rbf", tol: float = DEFAULT_TOL,
              max_iter: int = 1_000_000, cache_rows: int = CACHE_ROWS) -> OcsvmModel:
    """Fit a one-class SVM on the rows of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("training data must be 2-d")
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least 2 training points")
    if not (0.0 < nu <= 1.0):
        raise ValueError("nu must lie in (0, 1]")
    if isinstance(kernel, str):
        kernel = Kernel(kernel)
    kernel = kernel.resolved(x.shape[1])
    upper = 1.0 / (nu * n)

    if np.all(x == x[0]):
        warnings.warn("all training points identical; returning uniform model", stacklevel=2)
        alpha = np.full(n, 1.0 / n)
        rho = float(kernel(x[:1], x[:1])[0, 0])
        return OcsvmModel(x.copy(), alpha, np.arange(n), rho, kernel, nu, n)

    cache = KernelCache(x, kernel, cache_rows)
    alpha = _initial_alpha(n, upper)
    grad = np.zeros(n)
    for i in np.flatnonzero(alpha):
        grad += alpha[i] * cache.row(i)

    it = 0
    viol = 0.0
    while it < max_iter:
        up = alpha < upper
        low = alpha > 0
        gi = np.where(up, grad, np.inf)
        gj = np.where(low, grad, -np.inf)
        i = int(np.argmin(gi))
        j = int(np.argmax(gj))
        viol = gj[j] - gi[i]
        if viol < tol:
            break
        ki = cache.row(i)
        kj = cache.row(j)
        eta = cache.diag[i] + cache.diag[j] - 2.0 * ki[j]
        if eta <= 1e-12:
            eta = 1e-12
        step = viol / eta
        room_i = upper - alpha[i]
        room_j = alpha[j]
        if step >= room_i or step >= room_j:
            if room_i <= room_j:
                step = room_i
                alpha[i] = upper
                alpha[j] -= step
                if room_i == room_j:
                    alpha[j] = 0.0
            else:
                step = room_j
                alpha[j] = 0.0
                alpha[i] += step
        else:
            alpha[i] += step
            alpha[j] -= step
        grad += step * (ki - kj)
        it += 1
    else:
        log.warning("one-class SVM hit max_iter=%d (violation %.3g)", max_iter, viol)

    free = (alpha > 0) & (alpha < upper)
    if free.any():
        rho = float(grad[free].mean())
    else:
        # any rho in [max G over a=C, min G over a=0] satisfies KKT
        at_upper = grad[alpha >= upper]
        at_zero = grad[alpha <= 0]
        if at_upper.size and at_zero.size:
            rho = 0.5 * float(at_upper.max() + at_zero.min())
        elif at_upper.size:
            rho = float(at_upper.max())
        else:
            rho = float(at_zero.min())
    sv = np.flatnonzero(alpha > 0)
    return OcsvmModel(x[sv].copy(), alpha[sv].copy(), sv, rho, kernel, nu, n,
                      max_violation=float(max(viol, 0.0)), iterations=it)


def ocsvm_predict(model: OcsvmModel, x, node_ids=None) -> list[Prediction]:
    scores = model.decision_function(x)
    if node_ids is None:
        node_ids = [str(i) for i in range(len(scores))]
    return [Prediction(str(a), float(s), 1 if s >= 0.0 else -1) for a, s in zip(node_ids, scores)]


def kkt_violation(model: OcsvmModel, x) -> float:
    """Maximal pair violation of the fitted dual on its training matrix ``x``."""
    x = np.asarray(x, dtype=np.float64)
    alpha = np.zeros(model.n_train)
    alpha[model.support] = model.alpha
    grad = model.kernel(x, model.support_vectors) @ model.alpha
    return max_violation(alpha, grad, model.upper)
