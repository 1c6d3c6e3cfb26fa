# cython: language_level=3
"""Compiled embedding-geometry kernels.

Same contracts as `unikd.kernels.reference`; the matrix products go through
BLAS dgemm while the normalize / clamp / assemble stages are fused C loops.
Inputs must be validated C-contiguous float64 arrays (see reference module).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


def diag_cosine_grad(double[:, ::1] t, double[:, ::1] s):
    cdef Py_ssize_t m = t.shape[0]
    cdef Py_ssize_t d = t.shape[1]
    x_arr = np.empty(m, dtype=np.float64)
    g_arr = np.empty((m, d), dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[:, ::1] g = g_arr
    cdef Py_ssize_t i, j
    cdef double tn, sn, inv_tn, inv_sn, xi
    for i in range(m):
        tn = 0.0
        sn = 0.0
        for j in range(d):
            tn += t[i, j] * t[i, j]
            sn += s[i, j] * s[i, j]
        inv_tn = 1.0 / sqrt(tn)
        inv_sn = 1.0 / sqrt(sn)
        xi = 0.0
        for j in range(d):
            xi += (t[i, j] * inv_tn) * (s[i, j] * inv_sn)
        if xi > 1.0:
            xi = 1.0
        elif xi < -1.0:
            xi = -1.0
        x[i] = xi
        for j in range(d):
            g[i, j] = (t[i, j] * inv_tn - xi * s[i, j] * inv_sn) * inv_sn
    return x_arr, g_arr


cdef void _normalize_rows(double[:, ::1] src, double[:, ::1] dst) noexcept:
    cdef Py_ssize_t n = src.shape[0]
    cdef Py_ssize_t d = src.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, inv
    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc += src[i, j] * src[i, j]
        inv = 1.0 / sqrt(acc)
        for j in range(d):
            dst[i, j] = src[i, j] * inv


def pairwise_cosine(double[:, ::1] q, double[:, ::1] k):
    cdef int m = <int> q.shape[0]
    cdef int nk = <int> k.shape[0]
    cdef int d = <int> q.shape[1]
    qhat_arr = np.empty((m, d), dtype=np.float64)
    khat_arr = np.empty((nk, d), dtype=np.float64)
    out_arr = np.empty((m, nk), dtype=np.float64)
    cdef double[:, ::1] qhat = qhat_arr
    cdef double[:, ::1] khat = khat_arr
    cdef double[:, ::1] out = out_arr
    _normalize_rows(q, qhat)
    _normalize_rows(k, khat)
    cdef double one = 1.0
    cdef double zero = 0.0
    # Row-major out = qhat @ khat.T computed as Fortran out.T = khat.T.T @ qhat.T
    dgemm("T", "N", &nk, &m, &d, &one, &khat[0, 0], &d,
          &qhat[0, 0], &d, &zero, &out[0, 0], &nk)
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(nk):
            if out[i, j] > 1.0:
                out[i, j] = 1.0
            elif out[i, j] < -1.0:
                out[i, j] = -1.0
    return out_arr


def pairwise_cosine_grad(double[:, ::1] q, double[:, ::1] k,
                         double[:, ::1] s, double[:, ::1] w):
    cdef int m = <int> q.shape[0]
    cdef int nk = <int> k.shape[0]
    cdef int d = <int> q.shape[1]
    khat_arr = np.empty((nk, d), dtype=np.float64)
    a_arr = np.empty((m, d), dtype=np.float64)
    g_arr = np.empty((m, d), dtype=np.float64)
    cdef double[:, ::1] khat = khat_arr
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] g = g_arr
    _normalize_rows(k, khat)
    cdef double one = 1.0
    cdef double zero = 0.0
    # Row-major a = w @ khat computed as Fortran a.T = khat.T @ w.T
    dgemm("N", "N", &d, &m, &nk, &one, &khat[0, 0], &d,
          &w[0, 0], &nk, &zero, &a[0, 0], &d)
    cdef Py_ssize_t i, j
    cdef double qn, inv_qn, c
    for i in range(m):
        qn = 0.0
        for j in range(d):
            qn += q[i, j] * q[i, j]
        inv_qn = 1.0 / sqrt(qn)
        c = 0.0
        for j in range(nk):
            c += w[i, j] * s[i, j]
        for j in range(d):
            g[i, j] = (a[i, j] - c * q[i, j] * inv_qn) * inv_qn
    return g_arr
