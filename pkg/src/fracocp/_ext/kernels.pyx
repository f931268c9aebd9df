# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sweeps for the symmetric Gauss-Seidel preconditioner."""
import numpy as np


def sgs_apply(const Py_ssize_t[::1] indptr, const Py_ssize_t[::1] indices,
              const double[::1] data, const double[::1] diag, const double[::1] r):
    """Return ``(D+U)^{-1} D (D+L)^{-1} r`` for a CSR matrix ``L + D + U``."""
    cdef Py_ssize_t n = r.shape[0]
    cdef Py_ssize_t i, jj, j
    cdef double acc
    w_arr = np.empty(n)
    cdef double[::1] w = w_arr
    for i in range(n):
        acc = r[i]
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if j < i:
                acc -= data[jj] * w[j]
        w[i] = acc / diag[i]
    for i in range(n):
        w[i] *= diag[i]
    for i in range(n - 1, -1, -1):
        acc = w[i]
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if j > i:
                acc -= data[jj] * w[j]
        w[i] = acc / diag[i]
    return w_arr

