"""Classifier baselines: logistic regression, Gaussian naive Bayes, isolation forest.

Labels follow the project convention: +1 phishing (target), -1 normal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOGREG = "logreg"
GNB = "gnb"
IFOREST = "iforest"
BASELINES = (LOGREG, GNB, IFOREST)


class SingleClassError(ValueError):
    pass


def _two_classes(y: np.ndarray) -> None:
    if np.unique(y).size < 2:
        raise SingleClassError("supervised baseline needs both classes in training data")


class LogisticRegression:
    """L2-regularized logistic regression fit by damped Newton steps.

    Minimizes ``sum_i log(1 + exp(-y_i (w.x_i + b))) + l2/2 |w|^2`` until the
    gradient norm drops below ``tol``. The intercept is not penalized.
    """

    def __init__(self, l2: float = 1.0, tol: float = 1e-6, max_iter: int = 200):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter
        self.coef_: np.ndarray | None = None
        self.grad_norm_ = np.inf

    def _objective(self, theta, xb, y):
        z = y * (xb @ theta)
        return np.logaddexp(0.0, -z).sum() + 0.5 * self.l2 * theta[:-1] @ theta[:-1]

    def fit(self, x, y) -> "LogisticRegression":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        _two_classes(y)
        xb = np.hstack([x, np.ones((x.shape[0], 1))])
        reg = np.full(xb.shape[1], self.l2)
        reg[-1] = 0.0
        theta = np.zeros(xb.shape[1])
        for _ in range(self.max_iter):
            z = y * (xb @ theta)
            s = 0.5 * (1.0 - np.tanh(0.5 * z))  # sigmoid(-z)
            grad = -(xb.T @ (y * s)) + reg * theta
            self.grad_norm_ = float(np.linalg.norm(grad))
            if self.grad_norm_ < self.tol:
                break
            w = s * (1.0 - s)
            hess = (xb * w[:, None]).T @ xb + np.diag(reg) + 1e-12 * np.eye(xb.shape[1])
            step = np.linalg.solve(hess, grad)
            f0 = self._objective(theta, xb, y)
            t = 1.0
            while t > 1e-10 and self._objective(theta - t * step, xb, y) > f0 - 1e-4 * t * grad @ step:
                t *= 0.5
            theta = theta - t * step
        self.coef_ = theta
        return self

    def decision_function(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x @ self.coef_[:-1] + self.coef_[-1]

    def predict(self, x) -> np.ndarray:
        return np.where(self.decision_function(x) >= 0.0, 1, -1)


class GaussianNB:
    def __init__(self, var_floor: float = 1e-9):
        self.var_floor = var_floor

    def fit(self, x, y) -> "GaussianNB":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y)
        _two_classes(y)
        self.classes_ = np.array([-1, 1])
        self.mean_ = np.array([x[y == c].mean(axis=0) for c in self.classes_])
        self.var_ = np.array([np.maximum(x[y == c].var(axis=0), self.var_floor)
                              for c in self.classes_])
        self.log_prior_ = np.log(np.array([np.mean(y == c) for c in self.classes_]))
        return self

    def joint_log_likelihood(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = []
        for m, v, lp in zip(self.mean_, self.var_, self.log_prior_):
            out.append(lp - 0.5 * np.sum(np.log(2.0 * np.pi * v) + (x - m) ** 2 / v, axis=1))
        return np.column_stack(out)

    def decision_function(self, x) -> np.ndarray:
        jll = self.joint_log_likelihood(x)
        return jll[:, 1] - jll[:, 0]

    def predict(self, x) -> np.ndarray:
        return np.where(self.decision_function(x) >= 0.0, 1, -1)


def _avg_path(n) -> np.ndarray:
    """Average unsuccessful-search path length in a BST of ``n`` points."""
    n = np.asarray(n, dtype=np.float64)
    out = np.zeros_like(n)
    big = n > 2
    out[n == 2] = 1.0
    m = n[big]
    out[big] = 2.0 * (np.log(m - 1.0) + np.euler_gamma) - 2.0 * (m - 1.0) / m
    return out


@dataclass
class _Tree:
    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    size: list = field(default_factory=list)

    def add(self, size: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.size.append(size)
        return len(self.size) - 1

    def freeze(self):
        self.feature = np.array(self.feature, dtype=np.int64)
        self.threshold = np.array(self.threshold)
        self.left = np.array(self.left, dtype=np.int64)
        self.right = np.array(self.right, dtype=np.int64)
        self.size = np.array(self.size, dtype=np.int64)
        return self

    def path_length(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(len(x), dtype=np.int64)
        depth = np.zeros(len(x))
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = x[idx, self.feature[nd]] < self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            depth[idx] += 1.0
            active = self.feature[node] >= 0
        return depth + _avg_path(self.size[node])


class IsolationForest:
    """Isolation forest; larger ``score_samples`` means more anomalous."""

    def __init__(self, n_trees: int = 100, subsample: int = 256, contamination: float = 0.5,
                 seed: int = 0):
        self.n_trees = n_trees
        self.subsample = subsample
        self.contamination = contamination
        self.seed = seed

    def fit(self, x) -> "IsolationForest":
        x = np.asarray(x, dtype=np.float64)
        rng = np.random.default_rng(self.seed)
        self.psi_ = min(self.subsample, len(x))
        limit = int(np.ceil(np.log2(max(self.psi_, 2))))
        self.trees_ = []
        for _ in range(self.n_trees):
            sample = x[rng.choice(len(x), self.psi_, replace=False)]
            self.trees_.append(self._grow(sample, limit, rng))
        scores = self.score_samples(x)
        self.threshold_ = float(np.quantile(scores, 1.0 - self.contamination))
        return self

    @staticmethod
    def _grow(x, limit, rng) -> _Tree:
        tree = _Tree()
        stack = [(tree.add(len(x)), np.arange(len(x)), 0)]
        while stack:
            node, rows, depth = stack.pop()
            if depth >= limit or len(rows) <= 1:
                continue
            sub = x[rows]
            lo, hi = sub.min(axis=0), sub.max(axis=0)
            splittable = np.flatnonzero(hi > lo)
            if splittable.size == 0:
                continue
            f = int(rng.choice(splittable))
            t = float(rng.uniform(lo[f], hi[f]))
            mask = sub[:, f] < t
            left, right = rows[mask], rows[~mask]
            tree.feature[node] = f
            tree.threshold[node] = t
            tree.left[node] = tree.add(len(left))
            tree.right[node] = tree.add(len(right))
            stack.append((tree.left[node], left, depth + 1))
            stack.append((tree.right[node], right, depth + 1))
        return tree.freeze()

    def score_samples(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        depth = np.mean([t.path_length(x) for t in self.trees_], axis=0)
        return 2.0 ** (-depth / _avg_path(np.array([self.psi_]))[0])

    def predict(self, x) -> np.ndarray:
        """+1 for inliers (the target side), -1 for flagged anomalies."""
        return np.where(self.score_samples(x) > self.threshold_, -1, 1)


def baseline_fit_predict(train_x, train_y, test_x, which: str, seed: int = 0,
                         contamination: float = 0.5):
    """Fit the named baseline and return ``(labels, scores)`` for ``test_x``.

    Scores are oriented so that larger means more phishing-like.
    """
    if which == LOGREG:
        m = LogisticRegression().fit(train_x, train_y)
        return m.predict(test_x), m.decision_function(test_x)
    if which == GNB:
        m = GaussianNB().fit(train_x, train_y)
        return m.predict(test_x), m.decision_function(test_x)
    if which == IFOREST:
        m = IsolationForest(contamination=contamination, seed=seed).fit(train_x)
        return m.predict(test_x), m.threshold_ - m.score_samples(test_x)
    raise ValueError(f"unknown baseline {which!r}; expected one of {BASELINES}")
