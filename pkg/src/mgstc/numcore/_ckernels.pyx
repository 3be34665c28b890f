# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled row-wise kernels; mirrors ``_pykernels`` name for name."""
import numpy as np

from libc.math cimport erf, exp, fabs, sqrt

cdef double INV_SQRT2 = 0.7071067811865476
cdef double INV_SQRT2PI = 0.3989422804014327


def softmax_forward(const double[:, ::1] x):
    cdef Py_ssize_t rows = x.shape[0], n = x.shape[1], i, j
    out = np.empty((rows, n), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef double mx, s, inv
    for i in range(rows):
        mx = x[i, 0]
        for j in range(1, n):
            if x[i, j] > mx:
                mx = x[i, j]
        s = 0.0
        for j in range(n):
            y[i, j] = exp(x[i, j] - mx)
            s += y[i, j]
        inv = 1.0 / s
        for j in range(n):
            y[i, j] *= inv
    return out


def softmax_backward(const double[:, ::1] y, const double[:, ::1] dy):
    cdef Py_ssize_t rows = y.shape[0], n = y.shape[1], i, j
    out = np.empty((rows, n), dtype=np.float64)
    cdef double[:, ::1] dx = out
    cdef double dot
    for i in range(rows):
        dot = 0.0
        for j in range(n):
            dot += dy[i, j] * y[i, j]
        for j in range(n):
            dx[i, j] = y[i, j] * (dy[i, j] - dot)
    return out


def layernorm_forward(const double[:, ::1] x, double eps):
    cdef Py_ssize_t rows = x.shape[0], n = x.shape[1], i, j
    out = np.empty((rows, n), dtype=np.float64)
    rstd_arr = np.empty(rows, dtype=np.float64)
    cdef double[:, ::1] xhat = out
    cdef double[::1] rstd = rstd_arr
    cdef double mu, var, d, r
    for i in range(rows):
        mu = 0.0
        for j in range(n):
            mu += x[i, j]
        mu /= n
        var = 0.0
        for j in range(n):
            d = x[i, j] - mu
            var += d * d
        var /= n
        r = 1.0 / sqrt(var + eps)
        rstd[i] = r
        for j in range(n):
            xhat[i, j] = (x[i, j] - mu) * r
    return out, rstd_arr


def layernorm_backward(const double[:, ::1] dxhat, const double[:, ::1] xhat,
                       const double[::1] rstd):
    cdef Py_ssize_t rows = dxhat.shape[0], n = dxhat.shape[1], i, j
    out = np.empty((rows, n), dtype=np.float64)
    cdef double[:, ::1] dx = out
    cdef double m1, m2
    for i in range(rows):
        m1 = 0.0
        m2 = 0.0
        for j in range(n):
            m1 += dxhat[i, j]
            m2 += dxhat[i, j] * xhat[i, j]
        m1 /= n
        m2 /= n
        for j in range(n):
            dx[i, j] = rstd[i] * (dxhat[i, j] - m1 - xhat[i, j] * m2)
    return out


def gelu_forward(x_in):
    x_arr = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef const double[::1] x = x_arr.reshape(-1)
    out = np.empty(x_arr.shape, dtype=np.float64)
    cdef double[::1] y = out.reshape(-1)
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        y[i] = 0.5 * x[i] * (1.0 + erf(x[i] * INV_SQRT2))
    return out


def gelu_backward(x_in, dy_in):
    x_arr = np.ascontiguousarray(x_in, dtype=np.float64)
    dy_arr = np.ascontiguousarray(dy_in, dtype=np.float64)
    cdef const double[::1] x = x_arr.reshape(-1)
    cdef const double[::1] dy = dy_arr.reshape(-1)
    out = np.empty(x_arr.shape, dtype=np.float64)
    cdef double[::1] dx = out.reshape(-1)
    cdef Py_ssize_t i
    cdef double v
    for i in range(x.shape[0]):
        v = x[i]
        dx[i] = dy[i] * (0.5 * (1.0 + erf(v * INV_SQRT2)) + v * INV_SQRT2PI * exp(-0.5 * v * v))
    return out


def cumulative_mean(values):
    """Running means with Neumaier-compensated summation."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] v = arr
    out = np.empty(arr.shape[0], dtype=np.float64)
    cdef double[::1] res = out
    cdef double s = 0.0, c = 0.0, t
    cdef Py_ssize_t i
    for i in range(v.shape[0]):
        t = s + v[i]
        if fabs(s) >= fabs(v[i]):
            c += (s - t) + v[i]
        else:
            c += (v[i] - t) + s
        s = t
        res[i] = (s + c) / (i + 1)
    return out
