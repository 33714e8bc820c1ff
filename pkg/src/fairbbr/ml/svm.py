"""Linear soft-margin SVM trained with Pegasos sub-gradient steps."""

from __future__ import annotations

import numpy as np

from ..kernels import pegasos_epoch
from .preprocessing import EmptyInput, SingleClassData


def hinge_objective(scores, ys, b: float) -> float:
    return float(np.maximum(0.0, 1.0 - ys * (scores + b)).sum())


def optimal_bias(scores, ys) -> float:
    """Exact minimizer of sum(max(0, 1 - y (s + b))) over b.

    The objective is convex and piecewise linear with kinks at b = y - s, so a
    minimizer sits on a kink; bisection on the sorted kinks finds the first one.
    """
    scores = np.asarray(scores, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    kinks = np.unique(ys - scores)
    lo, hi = 0, len(kinks) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if hinge_objective(scores, ys, kinks[mid]) <= hinge_objective(scores, ys, kinks[mid + 1]):
            hi = mid
        else:
            lo = mid + 1
    return float(kinks[lo])


class LinearSvm:
    def __init__(self, lam: float = 0.01, epochs: int = 20, seed: int = 0, project: bool = True):
        if lam <= 0:
            raise ValueError("lam must be > 0")
        self.lam = lam
        self.epochs = epochs
        self.seed = seed
        self.project = project
        self.w = None
        self.b = 0.0

    def fit(self, X, y) -> "LinearSvm":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.shape[0] == 0:
            raise EmptyInput("no training rows")
        if len(np.unique(y)) < 2:
            raise SingleClassData("training labels contain a single class")
        ys = np.where(y == 1, 1.0, -1.0)
        self.w = np.zeros(X.shape[1], dtype=np.float64)
        self.b = 0.0
        rng = np.random.default_rng(self.seed)
        t = 0
        for _ in range(self.epochs):
            order = rng.permutation(len(ys)).astype(np.int64)
            t = pegasos_epoch(X, ys, self.w, self.b, self.lam, order, t, self.project)
            self.b = optimal_bias(X @ self.w, ys)
        return self

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.w + self.b

    def predict(self, X) -> np.ndarray:
        # a zero score falls on the Low side
        return (self.decision_function(X) > 0).astype(np.int64)

    def to_dict(self) -> dict:
        return {"lam": self.lam, "epochs": self.epochs, "w": [float(v) for v in self.w], "b": self.b}

    @classmethod
    def from_dict(cls, d) -> "LinearSvm":
        m = cls(lam=d["lam"], epochs=d["epochs"])
        m.w = np.asarray(d["w"], dtype=np.float64)
        m.b = float(d["b"])
        return m
