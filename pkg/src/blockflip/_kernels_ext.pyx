"""Compiled bipartite index kernels (same contract as ``_kernels_py``)."""

import numpy as np

from . import _kernels_py

# above this many multiply-adds the BLAS-backed einsum path is faster
BLAS_CROSSOVER = 40000


def partial_trace_first(const double complex[:, ::1] x, Py_ssize_t n, Py_ssize_t m):
    out = np.zeros((m, m), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t p, r, s, base
    for p in range(n):
        base = p * m
        for r in range(m):
            for s in range(m):
                o[r, s] += x[base + r, base + s]
    return out


def partial_transpose_second(const double complex[:, ::1] x, Py_ssize_t n, Py_ssize_t m):
    cdef Py_ssize_t d = n * m
    out = np.empty((d, d), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t p, q, r, s
    for p in range(n):
        for r in range(m):
            for q in range(n):
                for s in range(m):
                    o[p * m + r, q * m + s] = x[p * m + s, q * m + r]
    return out


def reshuffle_contract(const double complex[:, ::1] s, Py_ssize_t n, Py_ssize_t m):
    cdef Py_ssize_t d = n * m
    if d * d * d > BLAS_CROSSOVER:
        return _kernels_py.reshuffle_contract(np.asarray(s), n, m)
    out = np.zeros((n, n, m, m), dtype=np.complex128)
    cdef double[::1] t = out.reshape(-1).view(np.float64)
    cdef const double[:, ::1] sv = np.asarray(s).view(np.float64)
    cdef const double* sp = &sv[0, 0]
    cdef double* tp = &t[0]
    cdef double* acc
    cdef const double* row
    cdef Py_ssize_t k, l, j, i, p, q, off
    cdef double ar, ai, br, bi
    # real arithmetic on interleaved (re, im) pairs; inner loop is contiguous
    for k in range(n):
        for l in range(n):
            for j in range(m):
                acc = tp + 2 * (((k * n + l) * m + j) * m)
                for p in range(n):
                    off = p * m
                    for q in range(m):
                        ar = sp[2 * ((off + j) * d + k * m + q)]
                        ai = sp[2 * ((off + j) * d + k * m + q) + 1]
                        row = sp + 2 * ((l * m + q) * d + off)
                        for i in range(m):
                            br = row[2 * i]
                            bi = row[2 * i + 1]
                            acc[2 * i] += ar * br - ai * bi
                            acc[2 * i + 1] += ar * bi + ai * br
    return out
