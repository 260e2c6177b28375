"""Spectral data of -J_eta^2 and the so(4) closed forms.

At a point eta the positive semidefinite matrix -J_eta^2 splits as
``sum_j b_j^2 P_j`` plus a kernel projection ``P0``.  `decompose` computes
this numerically with a clustering guard band, so that eta close to the
singular set is reported instead of being mis-clustered.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .errors import (
    ClusterAmbiguous,
    DimensionMismatch,
    InconsistentProfiles,
    NotSkew,
    RepeatedEigenvalue,
    ValidationError,
    ZeroEta,
    ZeroMatrix,
)
from .group import SKEW_TOL, StratifiedGroup, j_matrix

DEFAULT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralData:
    done: int
    b: np.ndarray
    r: tuple
    r0: int
    P: np.ndarray = field(repr=False)  # shape (done, d1, d1)
    P0: np.ndarray = field(repr=False)

    @property
    def profile(self):
        return (self.done, self.r0, tuple(self.r))

    @property
    def r_total(self) -> int:
        return int(sum(self.r))

    def to_json(self) -> dict:
        return {
            "done": self.done,
            "b": [float(v) for v in self.b],
            "r": list(self.r),
            "r0": self.r0,
            "P": np.asarray(self.P).tolist(),
            "P0": np.asarray(self.P0).tolist(),
        }


@dataclass(frozen=True)
class GenericProfile:
    done: int
    r0: int
    r: tuple
    witness: tuple

    @property
    def key(self):
        return (self.done, self.r0, tuple(self.r))


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def decompose_matrix(J, tol: float = DEFAULT_TOL) -> SpectralData:
    """Spectral data of -J^2 for a single skew matrix J."""
    J = np.asarray(J, dtype=float)
    Jsq = _sym(J.T @ J)  # equals -J^2 for skew J
    w, V = eigh(Jsq)
    w, V = w[::-1], V[:, ::-1]
    top = w[0]
    if not top > 0.0:
        raise ZeroEta("J_eta vanishes")
    atol = tol * top
    lo = atol / 10.0
    # zero cluster with guard band
    if np.any((w >= lo) & (w < atol)):
        raise ClusterAmbiguous("an eigenvalue of -J^2 sits in the guard band around zero")
    npos = int(np.sum(w >= atol))
    gaps = w[: npos - 1] - w[1:npos]
    if np.any((gaps >= lo) & (gaps < atol)):
        raise ClusterAmbiguous("two eigenvalue clusters are closer than the tolerance allows")
    cuts = np.flatnonzero(gaps >= atol) + 1
    bounds = np.concatenate([[0], cuts, [npos]]).astype(int)
    b, r, P = [], [], []
    for s, e in zip(bounds[:-1], bounds[1:]):
        m = e - s
        if m % 2:
            raise ClusterAmbiguous(f"cluster of odd size {m}; eigenvalues of -J^2 come in pairs")
        b.append(np.sqrt(np.mean(w[s:e])))
        r.append(int(m // 2))
        vecs = V[:, s:e]
        P.append(_sym(vecs @ vecs.T))
    zero = V[:, npos:]
    P0 = _sym(zero @ zero.T)
    return SpectralData(len(b), np.array(b), tuple(r), int(J.shape[0] - npos), np.array(P), P0)


def decompose(G: StratifiedGroup, eta, tol: float = DEFAULT_TOL) -> SpectralData:
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if eta.shape != (G.d2,):
        raise DimensionMismatch(f"eta must have {G.d2} components")
    if not np.any(eta):
        raise ZeroEta("eta = 0 has no spectral decomposition")
    return decompose_matrix(j_matrix(G, eta), tol)


def generic_profile(G: StratifiedGroup, nsamples: int = 64, seed: int = 0, tol: float = DEFAULT_TOL) -> GenericProfile:
    """Multiplicity profile attained at random unit eta.

    The profile with the largest number of distinct eigenvalues wins, ties
    going to the smallest kernel.  A profile seen only once is not trusted.
    """
    if nsamples < 8:
        raise ValidationError("generic_profile needs nsamples >= 8")
    rng = np.random.default_rng(seed)
    etas = rng.standard_normal((nsamples, G.d2))
    etas /= np.linalg.norm(etas, axis=1, keepdims=True)
    counts, witness = Counter(), {}
    for eta in etas:
        try:
            sd = decompose(G, eta, tol)
        except ClusterAmbiguous:
            continue
        counts[sd.profile] += 1
        witness.setdefault(sd.profile, tuple(float(v) for v in eta))
    repeated = [p for p, n in counts.items() if n >= 2]
    if not repeated:
        raise InconsistentProfiles(f"no multiplicity profile repeated across {nsamples} samples: {dict(counts)}")
    best = max(repeated, key=lambda p: (p[0], -p[1], counts[p]))
    return GenericProfile(best[0], best[1], best[2], witness[best])


def projections_interpolation(b, Jsq) -> np.ndarray:
    """P_j = F_j(Jsq) with the Lagrange-type polynomial vanishing at 0 and the other b^2."""
    b = np.asarray(b, dtype=float)
    Jsq = np.asarray(Jsq, dtype=float)
    if b.ndim != 1 or len(b) == 0 or np.any(b <= 0):
        raise RepeatedEigenvalue("b must be a non-empty list of positive values")
    if np.any(np.diff(b) >= -1e-12 * b[0]):
        raise RepeatedEigenvalue(f"b is not strictly decreasing: {b}")
    n = Jsq.shape[0]
    eye = np.eye(n)
    out = []
    for j, bj in enumerate(b):
        num = Jsq.copy()
        den = bj**2
        for jj, bk in enumerate(b):
            if jj != j:
                num = num @ (Jsq - bk**2 * eye)
                den *= bj**2 - bk**2
        out.append(_sym(num / den))
    return np.array(out)


# -- so(4) ------------------------------------------------------------------

def _check_skew4(mu):
    mu = np.asarray(mu, dtype=float)
    if mu.shape[-2:] != (4, 4):
        raise DimensionMismatch("expected 4x4 skew matrices")
    if np.max(np.abs(mu + np.swapaxes(mu, -1, -2)), initial=0.0) > SKEW_TOL:
        raise NotSkew("matrix is not skew-symmetric within 1e-12")
    return mu


_EPS4 = np.zeros((4, 4, 4, 4))
for _p in itertools.permutations(range(4)):
    _inv = sum(1 for a in range(4) for c in range(a + 1, 4) if _p[a] > _p[c])
    _EPS4[_p] = -1.0 if _inv % 2 else 1.0


def hodge_star(mu):
    """(*mu)_{ij} = 1/2 sum_{kl} eps_{ijkl} mu_{kl}, with eps_1234 = +1."""
    return 0.5 * np.einsum("ijkl,...kl->...ij", _EPS4, mu)


def so4_norm(mu):
    """|mu|^2 = -tr(mu mu)/4; returns |mu|."""
    return np.sqrt(np.maximum(-np.einsum("...ij,...ji->...", mu, mu) / 4.0, 0.0))


def so4_split(mu):
    """Return (mu_minus, mu_plus): anti-self-dual and self-dual parts."""
    mu = _check_skew4(mu)
    star = hodge_star(mu)
    return 0.5 * (mu - star), 0.5 * (mu + star)


def four_dim_closed_form(mu, rel_tol: float = 1e-12) -> SpectralData:
    """Spectral data of a nonzero skew 4x4 matrix from its so(4) split."""
    mu = _check_skew4(mu)
    mod = so4_norm(mu)
    if not mod > 0.0:
        raise ZeroMatrix("mu = 0")
    minus, plus = so4_split(mu)
    n_p, n_m = so4_norm(plus), so4_norm(minus)
    eye = np.eye(4)
    if n_p <= rel_tol * mod or n_m <= rel_tol * mod:
        return SpectralData(1, np.array([mod]), (2,), 0, eye[None].copy(), np.zeros((4, 4)))
    A = (plus / n_p) @ (minus / n_m)
    P1, P2 = _sym(0.5 * eye - 0.5 * A), _sym(0.5 * eye + 0.5 * A)
    b1, b2 = n_p + n_m, abs(n_p - n_m)
    if b2 <= rel_tol * mod:
        return SpectralData(1, np.array([b1]), (1,), 2, P1[None], P2)
    return SpectralData(2, np.array([b1, b2]), (1, 1), 0, np.array([P1, P2]), np.zeros((4, 4)))


def four_dim_batch(mu):
    """Vectorised closed form for a stack of 4x4 skew matrices in the generic case.

    Returns ``b`` of shape (N, 2) and ``P`` of shape (N, 2, 4, 4); rows where
    one of the self-dual/anti-self-dual parts vanishes are not special-cased
    and must be screened by the caller (``b[:, 1]`` tiny).
    """
    mu = np.asarray(mu, dtype=float)
    minus, plus = so4_split(mu)
    n_p, n_m = so4_norm(plus), so4_norm(minus)
    with np.errstate(invalid="ignore", divide="ignore"):
        A = (plus / n_p[:, None, None]) @ (minus / n_m[:, None, None])
    eye = np.eye(4)
    P = np.stack([_sym(0.5 * eye - 0.5 * A), _sym(0.5 * eye + 0.5 * A)], axis=1)
    b = np.stack([n_p + n_m, np.abs(n_p - n_m)], axis=1)
    return b, P


def batch_regular(G: StratifiedGroup, etas, profile: GenericProfile, tol: float = DEFAULT_TOL):
    """Spectral data for many eta at once, restricted to the generic profile.

    Returns ``(ok, b, P, P0)`` where ``ok`` flags eta whose eigenvalue clusters
    have exactly the generic layout.  Entries with ``ok`` False are zero.
    """
    etas = np.asarray(etas, dtype=float).reshape(-1, G.d2)
    J = j_matrix(G, etas)
    Jsq = _sym(np.swapaxes(J, -1, -2) @ J)
    w, V = np.linalg.eigh(Jsq)
    w, V = w[:, ::-1], V[:, :, ::-1]
    top = w[:, 0]
    ok = top > 0
    safe_top = np.where(ok, top, 1.0)
    atol = tol * safe_top
    lo = atol / 10.0
    N, d1 = w.shape
    done, r0, r = profile.done, profile.r0, tuple(profile.r)
    b = np.zeros((N, done))
    P = np.zeros((N, done, d1, d1))
    start = 0
    for j, rj in enumerate(r):
        blk = w[:, start : start + 2 * rj]
        # inside a cluster every gap must be below the guard band
        if 2 * rj > 1:
            inner = -np.diff(blk, axis=1)
            ok &= np.all(inner < lo[:, None], axis=1)
        nxt = start + 2 * rj
        if nxt < d1:
            gap = blk[:, -1] - w[:, nxt]
            ok &= gap >= atol
        ok &= blk[:, -1] >= atol
        b[:, j] = np.sqrt(np.maximum(blk.mean(axis=1), 0.0))
        vecs = V[:, :, start:nxt]
        P[:, j] = _sym(vecs @ np.swapaxes(vecs, -1, -2))
        start = nxt
    if r0:
        ok &= np.all(w[:, start:] < lo[:, None], axis=1)
        vecs = V[:, :, start:]
        P0 = _sym(vecs @ np.swapaxes(vecs, -1, -2))
    else:
        P0 = np.zeros((N, d1, d1))
    b[~ok] = 0.0
    P[~ok] = 0.0
    P0[~ok] = 0.0
    return ok, b, P, P0
