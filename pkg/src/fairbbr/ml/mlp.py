"""One-hidden-layer ReLU network with hand-written backprop and Adam."""

from __future__ import annotations

import logging
import math
from typing import Callable, Optional

import numpy as np

from .preprocessing import EmptyInput, SingleClassData

log = logging.getLogger(__name__)


class NonFiniteTarget(ValueError):
    pass


class Adam:
    def __init__(self, params: list, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _softplus(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Mlp:
    """Dense(n_in -> hidden, ReLU) -> Dense(hidden -> n_out).

    output="sigmoid" trains with binary cross-entropy on the logit, output="linear"
    with mean squared error.
    """

    def __init__(self, n_in: int, hidden: int = 16, n_out: int = 1, output: str = "sigmoid", seed: int = 0):
        if output not in ("sigmoid", "linear"):
            raise ValueError(f"unknown output {output!r}")
        self.n_in, self.hidden, self.n_out, self.output = n_in, hidden, n_out, output
        rng = np.random.default_rng(seed)
        lim1 = math.sqrt(6.0 / (n_in + hidden))
        lim2 = math.sqrt(6.0 / (hidden + n_out))
        self.W1 = rng.uniform(-lim1, lim1, size=(n_in, hidden))
        self.b1 = np.zeros(hidden)
        self.W2 = rng.uniform(-lim2, lim2, size=(hidden, n_out))
        self.b2 = np.zeros(n_out)

    @property
    def params(self) -> list:
        return [self.W1, self.b1, self.W2, self.b2]

    def logits(self, X):
        h = np.maximum(np.asarray(X, dtype=np.float64) @ self.W1 + self.b1, 0.0)
        return h @ self.W2 + self.b2

    def forward(self, X):
        z = self.logits(X)
        return _sigmoid(z) if self.output == "sigmoid" else z

    def loss_and_grads(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).reshape(len(X), self.n_out)
        n = len(X)
        z1 = X @ self.W1 + self.b1
        h = np.maximum(z1, 0.0)
        z2 = h @ self.W2 + self.b2
        if self.output == "sigmoid":
            loss = float(np.mean(_softplus(z2) - y * z2))
            dz2 = (_sigmoid(z2) - y) / (n * self.n_out)
        else:
            diff = z2 - y
            loss = float(np.mean(diff * diff))
            dz2 = 2.0 * diff / (n * self.n_out)
        dW2 = h.T @ dz2
        db2 = dz2.sum(axis=0)
        dz1 = (dz2 @ self.W2.T) * (z1 > 0)
        dW1 = X.T @ dz1
        db1 = dz1.sum(axis=0)
        return loss, [dW1, db1, dW2, db2]

    def loss(self, X, y) -> float:
        return self.loss_and_grads(X, y)[0]

    def train(self, X, y, lr: float, epochs: int, log_every: int = 0,
              on_log: Optional[Callable] = None) -> list:
        """Full-batch Adam. Returns [(epoch, loss)] at every log_every-th epoch.

        The logged loss is the one computed before that epoch's update.
        """
        opt = Adam(self.params, lr=lr)
        trace = []
        for epoch in range(epochs):
            loss, grads = self.loss_and_grads(X, y)
            if log_every and epoch % log_every == 0:
                trace.append((epoch, loss))
                if on_log is not None:
                    on_log(epoch, loss)
                log.debug("Epoch %d, Loss: %s", epoch, loss)
            opt.step(grads)
        return trace

    def to_dict(self) -> dict:
        return {
            "n_in": self.n_in, "hidden": self.hidden, "n_out": self.n_out, "output": self.output,
            "W1": self.W1.tolist(), "b1": self.b1.tolist(), "W2": self.W2.tolist(), "b2": self.b2.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "Mlp":
        m = cls(d["n_in"], d["hidden"], d["n_out"], d["output"])
        m.W1 = np.asarray(d["W1"], dtype=np.float64)
        m.b1 = np.asarray(d["b1"], dtype=np.float64)
        m.W2 = np.asarray(d["W2"], dtype=np.float64)
        m.b2 = np.asarray(d["b2"], dtype=np.float64)
        return m


class MlpClassifier:
    def __init__(self, hidden: int = 16, lr: float = 0.001, epochs: int = 2000, seed: int = 0):
        self.hidden, self.lr, self.epochs, self.seed = hidden, lr, epochs, seed
        self.net: Optional[Mlp] = None

    def fit(self, X, y) -> "MlpClassifier":
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] == 0:
            raise EmptyInput("no training rows")
        if len(np.unique(y)) < 2:
            raise SingleClassData("training labels contain a single class")
        self.net = Mlp(X.shape[1], self.hidden, 1, "sigmoid", self.seed)
        self.net.train(X, np.asarray(y, dtype=np.float64), self.lr, self.epochs)
        return self

    def predict_proba(self, X) -> np.ndarray:
        return self.net.forward(X)[:, 0]

    def predict(self, X) -> np.ndarray:
        # logit > 0 is p > 0.5 without rounding trouble
        return (self.net.logits(X)[:, 0] > 0).astype(np.int64)

    def to_dict(self) -> dict:
        return {"lr": self.lr, "epochs": self.epochs, "net": self.net.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "MlpClassifier":
        net = Mlp.from_dict(d["net"])
        m = cls(net.hidden, d["lr"], d["epochs"])
        m.net = net
        return m


class MlpRegressor:
    """Fits standardized targets; predictions are mapped back to target units."""

    def __init__(self, hidden: int = 16, lr: float = 0.01, epochs: int = 1000, seed: int = 0,
                 log_every: int = 100):
        self.hidden, self.lr, self.epochs, self.seed, self.log_every = hidden, lr, epochs, seed, log_every
        self.net: Optional[Mlp] = None
        self.y_mean = 0.0
        self.y_std = 1.0
        self.trace: list = []

    def fit(self, X, y, on_log: Optional[Callable] = None) -> "MlpRegressor":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.shape[0] == 0:
            raise EmptyInput("no training rows")
        if not np.all(np.isfinite(y)):
            raise NonFiniteTarget("regression targets must be finite")
        self.y_mean = float(y.mean())
        self.y_std = float(y.std()) or 1.0
        self.net = Mlp(X.shape[1], self.hidden, 1, "linear", self.seed)
        self.trace = self.net.train(X, (y - self.y_mean) / self.y_std, self.lr, self.epochs,
                                    self.log_every, on_log)
        return self

    def predict(self, X) -> np.ndarray:
        return self.net.forward(X)[:, 0] * self.y_std + self.y_mean

    def trace_lines(self) -> list:
        return [f"Epoch {e}, Loss: {v}" for e, v in self.trace]

    def to_dict(self) -> dict:
        return {"lr": self.lr, "epochs": self.epochs, "y_mean": self.y_mean, "y_std": self.y_std,
                "net": self.net.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "MlpRegressor":
        net = Mlp.from_dict(d["net"])
        m = cls(net.hidden, d["lr"], d["epochs"])
        m.net, m.y_mean, m.y_std = net, d["y_mean"], d["y_std"]
        return m
