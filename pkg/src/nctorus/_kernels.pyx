# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twisted-convolution kernels (see ``_kernels_py`` for the fallback)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, M_PI

cnp.import_array()


def bilinear_form(const double[:, ::1] lower, const cnp.int64_t[:, ::1] a, const cnp.int64_t[:, ::1] b):
    cdef Py_ssize_t p = a.shape[0], n = a.shape[1], r, j, k
    cdef double acc, row
    out = np.empty(p, dtype=np.float64)
    cdef double[::1] o = out
    for r in range(p):
        acc = 0.0
        for j in range(1, n):
            if a[r, j] == 0:
                continue
            row = 0.0
            for k in range(j):
                row += lower[j, k] * b[r, k]
            acc += a[r, j] * row
        o[r] = acc
    return out


def twisted_products(const cnp.int64_t[:, ::1] ia, const double complex[::1] ca,
                     const cnp.int64_t[:, ::1] ib, const double complex[::1] cb,
                     const double[:, ::1] lower, double t):
    cdef Py_ssize_t p = ia.shape[0], n = ia.shape[1], q = ib.shape[0]
    cdef Py_ssize_t r, s, j, k, row
    cdef double acc, la, ang
    idx = np.empty((p * q, n), dtype=np.int64)
    coeff = np.empty(p * q, dtype=np.complex128)
    cdef cnp.int64_t[:, ::1] oi = idx
    cdef double complex[::1] oc = coeff
    # a^T L precomputed per left factor
    left = np.zeros((p, n), dtype=np.float64)
    cdef double[:, ::1] lv = left
    for r in range(p):
        for k in range(n):
            la = 0.0
            for j in range(k + 1, n):
                la += ia[r, j] * lower[j, k]
            lv[r, k] = la
    for r in range(p):
        for s in range(q):
            row = r * q + s
            acc = 0.0
            for k in range(n):
                acc += lv[r, k] * ib[s, k]
                oi[row, k] = ia[r, k] + ib[s, k]
            ang = 2.0 * M_PI * t * acc
            oc[row] = ca[r] * cb[s] * (cos(ang) + 1j * sin(ang))
    return idx, coeff
