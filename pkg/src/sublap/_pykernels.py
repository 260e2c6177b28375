"""Numpy fallback for the compiled Laguerre kernels (same interface)."""
import numpy as np

_BIG = 1e150
_SMALL = 1e-150
_LOG_BIG = np.log(_BIG)
_LOG_FLOOR = -708.0


def _fac(lg):
    return np.where(lg < _LOG_FLOOR, 0.0, np.exp(np.maximum(lg, _LOG_FLOOR)))


def laguerre_table(k, t, N):
    t = np.ascontiguousarray(t, dtype=float)
    S = t.shape[0]
    out = np.empty((S, N + 1))
    lg = -t.copy()
    fac = _fac(lg)
    out[:, 0] = fac
    if N == 0:
        return out
    qm = np.ones(S)
    q = -(1.0 + k - 2.0 * t)
    out[:, 1] = q * fac
    for n in range(1, N):
        qn = (-(2.0 * n + 1.0 + k - 2.0 * t) * q - (n + k) * qm) / (n + 1.0)
        qm, q = q, qn
        big = np.abs(q) > _BIG
        if big.any():
            q[big] *= _SMALL
            qm[big] *= _SMALL
            lg[big] += _LOG_BIG
            fac = _fac(lg)
        out[:, n + 1] = q * fac
    return out


def series1(C, k, t):
    C = np.asarray(C, dtype=float)
    if C.shape[0] == 0:
        return np.zeros(len(t))
    return laguerre_table(k, t, C.shape[0] - 1) @ C


def series1_rows(C, k, t):
    C = np.asarray(C, dtype=float)
    if C.shape[1] == 0:
        return np.zeros(len(t))
    return np.einsum("sn,sn->s", laguerre_table(k, t, C.shape[1] - 1), C)


def series2(C, k1, k2, t1, t2):
    C = np.asarray(C, dtype=float)
    if C.size == 0:
        return np.zeros(len(t1))
    T1 = laguerre_table(k1, t1, C.shape[0] - 1)
    T2 = laguerre_table(k2, t2, C.shape[1] - 1)
    return np.einsum("sj,sj->s", T1 @ C, T2)
