"""Feature standardization, seeded train/test splits and k-fold cross-validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class EmptyInput(ValueError):
    pass


class TooFewRows(ValueError):
    pass


class InvalidK(ValueError):
    pass


class SingleClassData(ValueError):
    pass


@dataclass
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def transform(self, X) -> np.ndarray:
        return standardize_apply(self, X)

    def to_dict(self) -> dict:
        return {"means": [float(v) for v in self.means], "stds": [float(v) for v in self.stds]}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(np.asarray(d["means"], dtype=np.float64), np.asarray(d["stds"], dtype=np.float64))


def standardize_fit(X) -> Standardizer:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise EmptyInput("cannot fit a scaler on zero rows")
    stds = X.std(axis=0)
    # rounding in the mean can leave a tiny nonzero std on a constant column
    stds[X.max(axis=0) == X.min(axis=0)] = 0.0
    return Standardizer(X.mean(axis=0), stds)


def standardize_apply(s: Standardizer, X) -> np.ndarray:
    """(x - mean) / std per column; zero-variance columns map to 0."""
    X = np.asarray(X, dtype=np.float64)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    safe = np.where(s.stds > 0, s.stds, 1.0)
    out = np.where(s.stds > 0, (X - s.means) / safe, 0.0)
    return out[:, 0] if squeeze else out


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")


def split_indices(n: int, spec: SplitSpec) -> tuple:
    if n < 2:
        raise TooFewRows(f"need at least 2 rows to split, got {n}")
    n_test = int(math.floor(spec.test_fraction * n + 0.5))
    n_test = min(max(n_test, 1), n - 1)
    perm = np.random.default_rng(spec.seed).permutation(n)
    return perm[n_test:], perm[:n_test]


def train_test_split(X, y, spec: SplitSpec = SplitSpec()) -> tuple:
    X = np.asarray(X)
    y = np.asarray(y)
    train, test = split_indices(len(y), spec)
    return X[train], X[test], y[train], y[test]


def derive_seed(*parts: int) -> int:
    """Stable 32-bit seed from a tuple of integers (order-sensitive)."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def kfold_indices(n: int, k: int, seed: int) -> list:
    if k < 2 or n < k:
        raise InvalidK(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


@dataclass
class CvReport:
    folds: list
    mean: float
    std: float
    num_runs: int = 1
    run_means: list = field(default_factory=list)

    @property
    def run_std(self) -> float:
        """Spread of per-run means; small values mean accuracy is stable across seeds."""
        return float(np.std(self.run_means)) if self.run_means else 0.0


def kfold_cv(model_factory: Callable, X, y, k: int = 5, seed: int = 0, num_runs: int = 1,
             standardize: bool = True) -> CvReport:
    """Repeated k-fold accuracy. model_factory(seed) must return an object with fit/predict.

    Fold partitions and model seeds are derived from (seed, run, fold), so serial and
    parallel schedules give identical numbers. The scaler is fit on each training
    part only.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n = len(y)
    if k < 2 or n < k:
        raise InvalidK(f"need 2 <= k <= n, got k={k}, n={n}")
    folds, run_means = [], []
    for run in range(num_runs):
        parts = kfold_indices(n, k, derive_seed(seed, run))
        run_scores = []
        for f, test_idx in enumerate(parts):
            train_idx = np.concatenate([p for j, p in enumerate(parts) if j != f])
            X_tr, X_te = X[train_idx], X[test_idx]
            if standardize:
                scaler = standardize_fit(X_tr)
                X_tr, X_te = standardize_apply(scaler, X_tr), standardize_apply(scaler, X_te)
            model = model_factory(derive_seed(seed, run, f))
            model.fit(X_tr, y[train_idx])
            pred = np.asarray(model.predict(X_te))
            run_scores.append(float(np.mean(pred == y[test_idx])))
        folds.extend(run_scores)
        run_means.append(float(np.mean(run_scores)))
    return CvReport(folds=folds, mean=float(np.mean(folds)), std=float(np.std(folds)),
                    num_runs=num_runs, run_means=run_means)
