"""CART decision tree for binary labels, split by weighted Gini impurity."""

from __future__ import annotations

import numpy as np

from ..kernels import gini_best_split
from .preprocessing import EmptyInput

MIN_GAIN = 1e-12


def gini(labels) -> float:
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n == 0:
        return 0.0
    p = float(np.sum(labels == 1)) / n
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


class DecisionTree:
    def __init__(self, max_depth: int = 16, min_samples_split: int = 2, seed: int = 0):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.seed = seed  # accepted for a uniform factory signature; CART here is deterministic
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.counts = []

    def _new_node(self, counts) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(counts)
        return len(self.feature) - 1

    def fit(self, X, y) -> "DecisionTree":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise EmptyInput("decision tree needs at least one row and one feature")
        self.feature, self.threshold, self.left, self.right, self.counts = [], [], [], [], []
        self.n_features = X.shape[1]
        stack = [(np.arange(len(y)), 0, None, None)]
        while stack:
            idx, depth, parent, side = stack.pop()
            ys = y[idx]
            pos = int(ys.sum())
            node = self._new_node([len(ys) - pos, pos])
            if parent is not None:
                (self.left if side == 0 else self.right)[parent] = node
            if pos == 0 or pos == len(ys) or len(ys) < self.min_samples_split or depth >= self.max_depth:
                continue
            split = self._best_split(X[idx], ys)
            if split is None:
                continue
            feat, thr = split
            mask = X[idx, feat] <= thr
            self.feature[node] = feat
            self.threshold[node] = thr
            # right pushed first so the left subtree gets the lower node ids
            stack.append((idx[~mask], depth + 1, node, 1))
            stack.append((idx[mask], depth + 1, node, 0))
        return self

    def _best_split(self, X, y):
        n = len(y)
        pos = float(y.sum())
        parent = n - (pos * pos + (n - pos) * (n - pos)) / n
        best = None
        best_score = parent - MIN_GAIN
        for f in range(X.shape[1]):
            order = np.argsort(X[:, f], kind="stable")
            xs = X[order, f]
            score, i = gini_best_split(xs, y[order])
            if i >= 0 and score < best_score:
                lo, hi = xs[i], xs[i + 1]
                thr = (lo + hi) / 2.0
                if not lo <= thr < hi:
                    thr = lo
                best, best_score = (f, float(thr)), score
        return best

    def _leaf(self, x) -> int:
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return node

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(len(X), dtype=np.int64)
        for i, x in enumerate(X):
            c = self.counts[self._leaf(x)]
            out[i] = 1 if c[1] > c[0] else 0
        return out

    @property
    def depth(self) -> int:
        def walk(node):
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))
        return walk(0) if self.feature else 0

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def to_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "n_features": getattr(self, "n_features", 0),
            "feature": list(self.feature),
            "threshold": [float(t) for t in self.threshold],
            "left": list(self.left),
            "right": list(self.right),
            "counts": [list(c) for c in self.counts],
        }

    @classmethod
    def from_dict(cls, d) -> "DecisionTree":
        t = cls(d["max_depth"], d["min_samples_split"])
        t.n_features = d["n_features"]
        t.feature = list(d["feature"])
        t.threshold = list(d["threshold"])
        t.left = list(d["left"])
        t.right = list(d["right"])
        t.counts = [list(c) for c in d["counts"]]
        return t
