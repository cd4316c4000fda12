# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense kernels.

All loops accumulate in ascending inner index so results are bitwise
reproducible regardless of thread count.
"""

import numpy as np

from libc.math cimport sqrt

name = "c"


def matmul(double[:, ::1] a, double[:, ::1] b):
    """Matrix product A @ B."""
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[1]
    cdef Py_ssize_t i, j, p
    cdef double s
    out = np.empty((m, n))
    cdef double[:, ::1] c = out
    for i in range(m):
        for j in range(n):
            s = 0.0
            for p in range(k):
                s += a[i, p] * b[p, j]
            c[i, j] = s
    return out


def gram(double[:, ::1] a):
    """A^T A, exactly symmetric (upper triangle computed, then mirrored)."""
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t i, j, p
    cdef double s
    out = np.empty((n, n))
    cdef double[:, ::1] g = out
    for i in range(n):
        for j in range(i, n):
            s = 0.0
            for p in range(m):
                s += a[p, i] * a[p, j]
            g[i, j] = s
            g[j, i] = s
    return out


def frob_norm(double[:, ::1] a):
    """Frobenius norm."""
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t i, j
    cdef double s = 0.0
    for i in range(m):
        for j in range(n):
            s += a[i, j] * a[i, j]
    return sqrt(s)


def solve_spd(double[:, ::1] s, double[:, ::1] b, double ridge):
    """Solve (S + ridge*I) X = B via Cholesky.

    Raises np.linalg.LinAlgError if the matrix is not positive definite.
    """
    cdef Py_ssize_t n = s.shape[0], ncols = b.shape[1]
    cdef Py_ssize_t i, j, k, col
    cdef double acc, d
    low = np.empty((n, n))
    cdef double[:, ::1] l = low
    # left-looking Cholesky of S + ridge*I, lower triangle
    for j in range(n):
        for i in range(j, n):
            acc = s[i, j]
            if i == j and ridge != 0.0:
                acc += ridge
            for k in range(j):
                acc -= l[i, k] * l[j, k]
            if i == j:
                if acc <= 0.0:
                    raise np.linalg.LinAlgError(
                        "matrix not positive definite (pivot %d)" % j)
                d = sqrt(acc)
                l[j, j] = d
            else:
                l[i, j] = acc / d
    out = np.empty((n, ncols))
    cdef double[:, ::1] x = out
    cdef double[::1] y = np.empty(n)
    for col in range(ncols):
        for i in range(n):  # forward solve L y = b
            acc = b[i, col]
            for k in range(i):
                acc -= l[i, k] * y[k]
            y[i] = acc / l[i, i]
        for i in range(n - 1, -1, -1):  # back solve L^T x = y
            acc = y[i]
            for k in range(i + 1, n):
                acc -= l[k, i] * x[k, col]
            x[i, col] = acc / l[i, i]
    return out
