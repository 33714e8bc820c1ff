# cython: language_level=3
"""Compiled kernels. Must stay arithmetically identical to _pykernels.py."""

from libc.math cimport sqrt, INFINITY
from libc.stdlib cimport malloc, realloc, free

import numpy as np


cdef class WindowedFilter:
    cdef double* _keys
    cdef double* _values
    cdef Py_ssize_t _cap, _head, _size
    cdef public bint maximize

    def __cinit__(self, maximize=True):
        self._cap = 16
        self._head = 0
        self._size = 0
        self._keys = <double*> malloc(self._cap * sizeof(double))
        self._values = <double*> malloc(self._cap * sizeof(double))
        if self._keys == NULL or self._values == NULL:
            raise MemoryError()
        self.maximize = bool(maximize)

    def __dealloc__(self):
        free(self._keys)
        free(self._values)

    def __len__(self):
        return self._size

    cdef void _grow(self) except *:
        cdef Py_ssize_t new_cap = self._cap * 2
        cdef double* k = <double*> malloc(new_cap * sizeof(double))
        cdef double* v = <double*> malloc(new_cap * sizeof(double))
        cdef Py_ssize_t i, src
        if k == NULL or v == NULL:
            free(k)
            free(v)
            raise MemoryError()
        for i in range(self._size):
            src = (self._head + i) % self._cap
            k[i] = self._keys[src]
            v[i] = self._values[src]
        free(self._keys)
        free(self._values)
        self._keys = k
        self._values = v
        self._cap = new_cap
        self._head = 0

    cpdef void update(self, double key, double value) except *:
        cdef Py_ssize_t last
        if self._size > 0:
            last = (self._head + self._size - 1) % self._cap
            if key < self._keys[last]:
                raise ValueError(f"keys must be non-decreasing ({key} < {self._keys[last]})")
        if self.maximize:
            while self._size > 0:
                last = (self._head + self._size - 1) % self._cap
                if self._values[last] <= value:
                    self._size -= 1
                else:
                    break
        else:
            while self._size > 0:
                last = (self._head + self._size - 1) % self._cap
                if self._values[last] >= value:
                    self._size -= 1
                else:
                    break
        if self._size == self._cap:
            self._grow()
        last = (self._head + self._size) % self._cap
        self._keys[last] = key
        self._values[last] = value
        self._size += 1

    cpdef object best(self, double cutoff):
        cdef Py_ssize_t i, idx
        for i in range(self._size):
            idx = (self._head + i) % self._cap
            if self._keys[idx] > cutoff:
                return self._values[idx]
        return None

    cpdef void expire(self, double cutoff):
        while self._size > 0 and self._keys[self._head] <= cutoff:
            self._head = (self._head + 1) % self._cap
            self._size -= 1

    def clear(self):
        self._head = 0
        self._size = 0


def gini_best_split(xs_in, ys_in):
    cdef double[::1] xs = np.ascontiguousarray(xs_in, dtype=np.float64)
    cdef double[::1] ys = np.ascontiguousarray(ys_in, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t i, best_i = -1
    cdef double total_pos = 0.0, pl = 0.0, nl, ql, pr, nr, qr, score
    cdef double best = INFINITY
    if n < 2:
        return float("inf"), -1
    for i in range(n):
        total_pos += ys[i]
    for i in range(n - 1):
        pl += ys[i]
        if not xs[i] < xs[i + 1]:
            continue
        nl = <double>(i + 1)
        ql = nl - pl
        pr = total_pos - pl
        nr = n - nl
        qr = nr - pr
        score = nl - (pl * pl + ql * ql) / nl + nr - (pr * pr + qr * qr) / nr
        if score < best:
            best = score
            best_i = i
    if best_i < 0:
        return float("inf"), -1
    return best, best_i


def pegasos_epoch(X_in, y_in, double[::1] w, double b, double lam, order_in, long t, bint project=False):
    cdef double[:, ::1] X = np.ascontiguousarray(X_in, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef long long[::1] order = np.ascontiguousarray(order_in, dtype=np.int64)
    cdef Py_ssize_t d = w.shape[0]
    cdef Py_ssize_t k, j, i
    cdef double eta, s, scale, step, norm_sq, f
    cdef double radius_sq = 1.0 / lam
    for k in range(order.shape[0]):
        i = order[k]
        t += 1
        eta = 1.0 / (lam * t)
        s = 0.0
        for j in range(d):
            s += w[j] * X[i, j]
        s += b
        scale = 1.0 - eta * lam
        if y[i] * s < 1.0:
            step = eta * y[i]
            for j in range(d):
                w[j] = scale * w[j] + step * X[i, j]
        else:
            for j in range(d):
                w[j] = scale * w[j]
        if project:
            norm_sq = 0.0
            for j in range(d):
                norm_sq += w[j] * w[j]
            if norm_sq > radius_sq:
                f = sqrt(radius_sq) / sqrt(norm_sq)
                for j in range(d):
                    w[j] = w[j] * f
    return t
