"""Pure-Python kernels. Reference semantics for the compiled twin in _ckernels.pyx."""

from collections import deque
import math

import numpy as np


class WindowedFilter:
    """Exact sliding-window max (or min) over a stream keyed by a non-decreasing key.

    Keeps a monotonic deque: an older sample dominated by a newer one can never be
    the extreme of any window that still contains the newer one, so it is dropped.
    """

    def __init__(self, maximize=True):
        self.maximize = bool(maximize)
        self._keys = deque()
        self._values = deque()

    def __len__(self):
        return len(self._keys)

    def update(self, key, value):
        keys, values = self._keys, self._values
        if keys and key < keys[-1]:
            raise ValueError(f"keys must be non-decreasing ({key} < {keys[-1]})")
        if self.maximize:
            while values and values[-1] <= value:
                values.pop()
                keys.pop()
        else:
            while values and values[-1] >= value:
                values.pop()
                keys.pop()
        keys.append(key)
        values.append(value)

    def best(self, cutoff):
        """Extreme value among samples with key > cutoff, or None."""
        for key, value in zip(self._keys, self._values):
            if key > cutoff:
                return value
        return None

    def expire(self, cutoff):
        keys, values = self._keys, self._values
        while keys and keys[0] <= cutoff:
            keys.popleft()
            values.popleft()

    def clear(self):
        self._keys.clear()
        self._values.clear()


def gini_best_split(xs, ys):
    """Best binary split of label-sorted data by weighted Gini.

    xs must be sorted ascending, ys are 0/1 labels aligned with xs. The score is the
    size-weighted impurity sum nl*gini(left) + nr*gini(right); the split sits between
    positions i and i+1 and only where xs[i] < xs[i+1]. Returns (score, i) or
    (inf, -1) when every value is identical.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    n = xs.shape[0]
    if n < 2:
        return math.inf, -1
    total_pos = float(ys.sum())
    pl = np.cumsum(ys)[:-1]
    nl = np.arange(1, n, dtype=np.float64)
    ql = nl - pl
    pr = total_pos - pl
    nr = n - nl
    qr = nr - pr
    score = nl - (pl * pl + ql * ql) / nl + nr - (pr * pr + qr * qr) / nr
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return math.inf, -1
    score = np.where(valid, score, np.inf)
    i = int(np.argmin(score))
    return float(score[i]), i


def pegasos_epoch(X, y, w, b, lam, order, t, project=False):
    """One pass of Pegasos subgradient steps over `order`; updates w in place.

    y holds +1/-1 labels, b is held fixed for the pass. Returns the new step count.
    """
    rows = np.asarray(X, dtype=np.float64).tolist()
    ys = np.asarray(y, dtype=np.float64).tolist()
    ww = w.tolist()
    d = len(ww)
    radius_sq = 1.0 / lam
    for i in np.asarray(order).tolist():
        t += 1
        eta = 1.0 / (lam * t)
        xi = rows[i]
        s = 0.0
        for j in range(d):
            s += ww[j] * xi[j]
        s += b
        scale = 1.0 - eta * lam
        if ys[i] * s < 1.0:
            step = eta * ys[i]
            for j in range(d):
                ww[j] = scale * ww[j] + step * xi[j]
        else:
            for j in range(d):
                ww[j] = scale * ww[j]
        if project:
            norm_sq = 0.0
            for j in range(d):
                norm_sq += ww[j] * ww[j]
            if norm_sq > radius_sq:
                f = math.sqrt(radius_sq) / math.sqrt(norm_sq)
                for j in range(d):
                    ww[j] = ww[j] * f
    w[:] = ww
    return t
