"""Depth-limited CART regression trees, bagged forests and gradient boosting.

Training samples are put in a canonical order before fitting, so results
depend only on the multiset of samples and the seed, never on input order.
"""
from __future__ import annotations

import numpy as np


def canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    keys = np.column_stack([X, y]).T[::-1]
    return np.lexsort(keys)


class RegressionTree:
    def __init__(self, max_depth: int = 4, min_samples_leaf: int = 1, max_features: int | None = None,
                 rng: np.random.Generator | None = None):
        self.max_depth = max_depth
        self.min_samples_leaf = max(1, min_samples_leaf)
        self.max_features = max_features
        self.rng = rng or np.random.default_rng(0)
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _new_node(self, value: float) -> int:
        for arr, v in ((self.feature, -1), (self.threshold, 0.0), (self.left, -1), (self.right, -1)):
            arr.append(v)
        self.value.append(value)
        return len(self.value) - 1

    def _best_split(self, X: np.ndarray, y: np.ndarray):
        n, p = X.shape
        m = self.min_samples_leaf
        features = np.arange(p)
        if self.max_features is not None and self.max_features < p:
            features = np.sort(self.rng.choice(p, self.max_features, replace=False))
        i = np.arange(m, n - m + 1)
        if not len(i):
            return None, None
        # all candidate features at once: columns are features
        order = np.argsort(X[:, features], axis=0, kind="stable")
        xs = np.take_along_axis(X[:, features], order, axis=0)
        cs = np.cumsum(y[order], axis=0)
        total = cs[-1]
        parent = total[0] ** 2 / n
        valid = xs[i - 1] < xs[np.minimum(i, n - 1)]
        left = cs[i - 1]
        ii = i[:, None].astype(float)
        score = left ** 2 / ii + (total - left) ** 2 / (n - ii) - parent
        score = np.where(valid, score, -np.inf)
        # first maximum in feature-major order keeps the old tie-breaking
        flat = score.T.ravel()
        j = int(np.argmax(flat))
        if not flat[j] > 1e-12 * max(1.0, abs(parent)):
            return None, None
        col, row = divmod(j, len(i))
        pos = i[row]
        return int(features[col]), (xs[pos - 1, col] + xs[pos, col]) / 2

    def _grow(self, X: np.ndarray, y: np.ndarray, depth: int) -> int:
        node = self._new_node(float(y.mean()))
        if depth >= self.max_depth or len(y) < 2 * self.min_samples_leaf or np.all(y == y[0]):
            return node
        f, thr = self._best_split(X, y)
        if f is None:
            return node
        mask = X[:, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self._grow(X[mask], y[mask], depth + 1)
        self.right[node] = self._grow(X[~mask], y[~mask], depth + 1)
        return node

    def fit(self, X, y) -> "RegressionTree":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self._grow(X, y, 0)
        self._arrays = (np.asarray(self.feature), np.asarray(self.threshold),
                        np.asarray(self.left), np.asarray(self.right), np.asarray(self.value))
        return self

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        feature, threshold, left, right, value = self._arrays
        node = np.zeros(len(X), dtype=int)
        rows = np.arange(len(X))
        active = feature[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, feature[nd]] <= threshold[nd]
            node[r] = np.where(go_left, left[nd], right[nd])
            active = feature[node] >= 0
        return value[node]


def _n_features(fraction: float, p: int) -> int:
    return max(1, int(round(fraction * p)))


class RandomForest:
    def __init__(self, n_trees: int = 50, max_depth: int = 4, max_features: float = 1 / 3,
                 min_samples_leaf: int = 1, bootstrap: bool = True, seed: int = 0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.bootstrap = bootstrap
        self.seed = seed
        self.trees: list[RegressionTree] = []

    def fit(self, X, y) -> "RandomForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        order = canonical_order(X, y)
        X, y = X[order], y[order]
        rng = np.random.default_rng(self.seed)
        k = _n_features(self.max_features, X.shape[1])
        self.trees = []
        for _ in range(self.n_trees):
            idx = rng.integers(0, len(y), len(y)) if self.bootstrap else np.arange(len(y))
            tree = RegressionTree(self.max_depth, self.min_samples_leaf, k, rng)
            self.trees.append(tree.fit(X[idx], y[idx]))
        return self

    def predict(self, X) -> np.ndarray:
        return np.mean([t.predict(X) for t in self.trees], axis=0)


class GradientBoosting:
    """Squared-loss boosting: each stage fits a shallow tree to the current residuals."""

    def __init__(self, n_estimators: int = 50, learning_rate: float = 0.1, max_depth: int = 3,
                 max_features: float = 1.0, min_samples_leaf: int = 1, seed: int = 0):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed
        self.init_ = 0.0
        self.trees: list[RegressionTree] = []

    def fit(self, X, y) -> "GradientBoosting":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        order = canonical_order(X, y)
        X, y = X[order], y[order]
        rng = np.random.default_rng(self.seed)
        k = _n_features(self.max_features, X.shape[1])
        self.init_ = float(y.mean())
        pred = np.full(len(y), self.init_)
        self.trees = []
        for _ in range(self.n_estimators):
            tree = RegressionTree(self.max_depth, self.min_samples_leaf, k, rng).fit(X, y - pred)
            pred += self.learning_rate * tree.predict(X)
            self.trees.append(tree)
        return self

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(len(X), self.init_)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out
