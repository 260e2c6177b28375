"""Laguerre functions ell_n^{(k)}(t) = (-1)^n e^{-t} L_n^{(k)}(2t) and series of them."""
from __future__ import annotations

import numpy as np

from . import _backend


def _kernels(backend=None):
    if backend is None:
        return _backend.kernels
    return _backend.BACKENDS[backend]


def laguerre_table(k: int, t, N: int, backend=None) -> np.ndarray:
    """Values ell_n^{(k)}(t_s) for n = 0..N, shape (len(t), N+1)."""
    t = np.ascontiguousarray(np.atleast_1d(t), dtype=float).ravel()
    return _kernels(backend).laguerre_table(int(k), t, int(N))


def laguerre_ell(n: int, k: int, t, backend=None):
    """ell_n^{(k)}(t); zero for n < 0.

    Computed by the damped three-term recurrence, so large n and t do not
    overflow.
    """
    scalar = np.ndim(t) == 0
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if n < 0:
        out = np.zeros(t_arr.shape)
    else:
        out = laguerre_table(k, t_arr.ravel(), n, backend)[:, n].reshape(t_arr.shape)
    return float(out[0]) if scalar else out


def laguerre_derivative_check(n: int, k: int, t: float, h: float) -> float:
    """|centred difference of ell_n^{(k)} at t - (ell_{n-1}^{(k+1)} - ell_n^{(k+1)})(t)|."""
    if not t > h > 0:
        raise ValueError("need t > h > 0")
    fd = (laguerre_ell(n, k, t + h) - laguerre_ell(n, k, t - h)) / (2 * h)
    exact = laguerre_ell(n - 1, k + 1, t) - laguerre_ell(n, k + 1, t)
    return abs(fd - exact)


def _trim(C, lead=0):
    """Drop trailing all-zero slices on each n-axis (axes after ``lead``)."""
    for ax in range(lead, C.ndim):
        other = tuple(a for a in range(C.ndim) if a != ax)
        nz = np.flatnonzero(np.any(C != 0, axis=other)) if C.size else []
        stop = int(nz[-1]) + 1 if len(nz) else 0
        C = np.take(C, np.arange(stop), axis=ax)
    return C


def _real_series(C, ks, ts, per_sample, kern):
    S = len(ts[0])
    if C.size == 0:
        return np.zeros(S)
    done = len(ks)
    if not per_sample and done == 1:
        return kern.series1(np.ascontiguousarray(C), ks[0], ts[0])
    if not per_sample and done == 2:
        return kern.series2(np.ascontiguousarray(C), ks[0], ks[1], ts[0], ts[1])
    if per_sample and done == 1:
        return kern.series1_rows(np.ascontiguousarray(C), ks[0], ts[0])
    # general case through explicit tables
    lead = 1 if per_sample else 0
    tables = [kern.laguerre_table(k, t, C.shape[lead + j] - 1) for j, (k, t) in enumerate(zip(ks, ts))]
    letters = "abcdefgh"[:done]
    spec = ("s" if per_sample else "") + letters + "," + ",".join("s" + c for c in letters) + "->s"
    return np.einsum(spec, C, *tables)


def ell_series(C, ks, ts, per_sample: bool = False, backend=None):
    """sum over the n-box of C[n] * prod_j ell_{n_j}^{(k_j)}(ts[j]).

    ``C`` has one axis per factor (shape (N_1+1, ..., N_done+1)), or an extra
    leading sample axis when ``per_sample``.  Complex coefficients are split
    into real and imaginary parts.  Trailing zero coefficients are trimmed
    first, so padding the box never changes the result.
    """
    ts = [np.ascontiguousarray(np.atleast_1d(t), dtype=float).ravel() for t in ts]
    ks = [int(k) for k in ks]
    C = np.asarray(C)
    C = _trim(C, 1 if per_sample else 0)
    kern = _kernels(backend)
    if np.iscomplexobj(C):
        re = _real_series(np.ascontiguousarray(C.real), ks, ts, per_sample, kern)
        if np.any(C.imag):
            return re + 1j * _real_series(np.ascontiguousarray(C.imag), ks, ts, per_sample, kern)
        return re.astype(complex)
    return _real_series(C.astype(float), ks, ts, per_sample, kern)
