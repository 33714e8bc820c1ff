"""Accuracy and error metrics for fitted models."""

from __future__ import annotations

import numpy as np

DEFAULT_TOLERANCE = 0.10


class EmptyTestSet(ValueError):
    pass


def accuracy(pred, y) -> float:
    y = np.asarray(y)
    if len(y) == 0:
        raise EmptyTestSet("no test rows")
    return float(np.mean(np.asarray(pred) == y))


def within_tolerance(pred, y, tolerance: float = DEFAULT_TOLERANCE) -> float:
    """Fraction of predictions whose absolute error is at most tolerance * |target|."""
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise EmptyTestSet("no test rows")
    return float(np.mean(np.abs(np.asarray(pred) - y) <= tolerance * np.abs(y)))


def majority_baseline(y) -> float:
    y = np.asarray(y)
    if len(y) == 0:
        raise EmptyTestSet("no rows")
    return float(max(np.mean(y == 1), np.mean(y != 1)))


def evaluate(model, X, y, mode: str = "classification", tolerance: float = DEFAULT_TOLERANCE) -> dict:
    y = np.asarray(y)
    if len(y) == 0:
        raise EmptyTestSet("no test rows")
    pred = np.asarray(model.predict(X))
    if mode == "classification":
        return {"accuracy": accuracy(pred, y)}
    if mode == "regression":
        diff = pred - y.astype(np.float64)
        return {"mse": float(np.mean(diff * diff)), "accuracy": within_tolerance(pred, y, tolerance)}
    raise ValueError(f"unknown mode {mode!r}")
