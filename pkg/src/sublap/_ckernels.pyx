# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Laguerre kernels.

The recurrence runs on q_n = (-1)^n L_n^{(k)}(2t) with a running log-scale,
so that the damped value e^{-t} q_n never overflows or underflows early.
Interfaces mirror `sublap._pykernels`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double BIG = 1e150
cdef double SMALL = 1e-150
cdef double LOG_BIG = 345.38776394910684
cdef double LOG_FLOOR = -708.0


cdef inline double _fac(double lg) nogil:
    if lg < LOG_FLOOR:
        return 0.0
    return exp(lg)


cdef void _row(int k, double t, int N, double* out) noexcept nogil:
    cdef double lg = -t
    cdef double fac = _fac(lg)
    cdef double qm = 1.0, q, qn
    cdef int n
    out[0] = fac
    if N == 0:
        return
    q = -(1.0 + k - 2.0 * t)
    out[1] = q * fac
    for n in range(1, N):
        qn = (-(2.0 * n + 1.0 + k - 2.0 * t) * q - (n + k) * qm) / (n + 1.0)
        qm = q
        q = qn
        if fabs(q) > BIG:
            q *= SMALL
            qm *= SMALL
            lg += LOG_BIG
            fac = _fac(lg)
        out[n + 1] = q * fac


def laguerre_table(int k, double[::1] t, int N):
    """Array of shape (len(t), N+1) with entry [s, n] = ell_n^{(k)}(t[s])."""
    cdef Py_ssize_t S = t.shape[0], s
    out = np.empty((S, N + 1), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for s in range(S):
            _row(k, t[s], N, &o[s, 0])
    return out


def series1(double[::1] C, int k, double[::1] t):
    """sum_n C[n] ell_n^{(k)}(t[s]) for every s."""
    cdef Py_ssize_t S = t.shape[0], s
    cdef int N = C.shape[0] - 1, n
    out = np.zeros(S, dtype=np.float64)
    cdef double[::1] o = out
    cdef double* buf
    cdef double acc
    if N < 0:
        return out
    buf = <double*> malloc((N + 1) * sizeof(double))
    try:
        with nogil:
            for s in range(S):
                _row(k, t[s], N, buf)
                acc = 0.0
                for n in range(N + 1):
                    acc += C[n] * buf[n]
                o[s] = acc
    finally:
        free(buf)
    return out


def series1_rows(double[:, ::1] C, int k, double[::1] t):
    """sum_n C[s, n] ell_n^{(k)}(t[s]) with a coefficient row per sample."""
    cdef Py_ssize_t S = t.shape[0], s
    cdef int N = C.shape[1] - 1, n
    out = np.zeros(S, dtype=np.float64)
    cdef double[::1] o = out
    cdef double* buf
    cdef double acc
    if N < 0:
        return out
    buf = <double*> malloc((N + 1) * sizeof(double))
    try:
        with nogil:
            for s in range(S):
                _row(k, t[s], N, buf)
                acc = 0.0
                for n in range(N + 1):
                    acc += C[s, n] * buf[n]
                o[s] = acc
    finally:
        free(buf)
    return out


def series2(double[:, ::1] C, int k1, int k2, double[::1] t1, double[::1] t2):
    """sum_{n1,n2} C[n1, n2] ell_{n1}^{(k1)}(t1[s]) ell_{n2}^{(k2)}(t2[s]).

    Only the nonzero band of each row of C is visited; skipped entries are
    exact zeros so the result matches a full sum bit for bit.
    """
    cdef Py_ssize_t S = t1.shape[0], s
    cdef int N1 = C.shape[0] - 1, N2 = C.shape[1] - 1, n1, n2
    out = np.zeros(S, dtype=np.float64)
    cdef double[::1] o = out
    if N1 < 0 or N2 < 0:
        return out
    nz = np.asarray(C) != 0.0
    any_row = nz.any(axis=1)
    lo_np = np.where(any_row, nz.argmax(axis=1), 0).astype(np.intc)
    hi_np = np.where(any_row, N2 + 1 - nz[:, ::-1].argmax(axis=1), 0).astype(np.intc)
    cdef int[::1] lo = lo_np
    cdef int[::1] hi = hi_np
    cdef double* b1 = <double*> malloc((N1 + 1) * sizeof(double))
    cdef double* b2 = <double*> malloc((N2 + 1) * sizeof(double))
    cdef double acc, inner
    cdef int top2
    # highest n2 needed by any row
    top2 = 0
    for n1 in range(N1 + 1):
        if hi[n1] > top2:
            top2 = hi[n1]
    try:
        with nogil:
            for s in range(S):
                _row(k1, t1[s], N1, b1)
                if top2 > 0:
                    _row(k2, t2[s], top2 - 1, b2)
                acc = 0.0
                for n1 in range(N1 + 1):
                    if hi[n1] == 0:
                        continue
                    inner = 0.0
                    for n2 in range(lo[n1], hi[n1]):
                        inner += C[n1, n2] * b2[n2]
                    acc += b1[n1] * inner
                o[s] = acc
    finally:
        free(b1)
        free(b2)
    return out
