"""Cutoff systems on the dual of the second layer and the weight w.

Homogeneous spherical partitions of unity, the dyadic cutoff chi, the split
into the cone region Omega_c and its complement Omega_p for the (37D) group,
sector frames and the cone-adapted cutoffs, and w(x) on the first layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln
from scipy.stats import norm, qmc

from .errors import BadParameters, DimensionMismatch, MeshTooCoarse, NotUnit, ValidationError, ZeroEta
from .group import StratifiedGroup, j_matrix, pfaffian_form
from .spectral import so4_split

C_HAT = 0.25
S_HAT = 0.125
SEPARATION_TOL = 1e-12


# -- smooth steps ---------------------------------------------------------

def _f(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(x):
    """C^infty step: 0 for x <= 0, 1 for x >= 1."""
    a, b = _f(x), _f(1.0 - np.asarray(x, dtype=float))
    return a / (a + b)


def phi_radial(r):
    """Plateau bump: 1 on [1/2, 5/2], support in [1/4, 4]."""
    r = np.asarray(r, dtype=float)
    return smooth_step((r - 0.25) / 0.25) * smooth_step((4.0 - r) / 1.5)


def dyadic_chi(t):
    """chi(t) = S(log2 t + 1) - S(log2 t); supp in [1/2, 2] and sum_n chi(2^n t) = 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    pos = t > 0
    lg = np.log2(t[pos])
    out[pos] = smooth_step(lg + 1.0) - smooth_step(lg)
    return out


# -- spherical partitions ---------------------------------------------------

def _sphere_mesh(n: int, M: int) -> np.ndarray:
    if n == 2:
        a = 2 * np.pi * np.arange(M) / M
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    if n == 3:
        i = np.arange(M) + 0.5
        z = 1 - 2 * i / M
        a = np.pi * (1 + 5**0.5) * i
        s = np.sqrt(1 - z * z)
        return np.stack([s * np.cos(a), s * np.sin(a), z], axis=1)
    u = qmc.Sobol(n, scramble=False).random(M)
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    g[0] = np.eye(n)[0]
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _greedy(mesh, eps):
    centers = []
    for p in mesh:
        if not centers or np.min(np.linalg.norm(np.array(centers) - p, axis=1)) >= eps - SEPARATION_TOL:
            centers.append(p)
    return np.array(centers)


def covering_holds(centers, eps, test) -> bool:
    """For every test point some center lies at distance in [eps/2, 5 eps/2)."""
    d = np.linalg.norm(test[:, None, :] - centers[None, :, :], axis=2)
    return bool(np.all(np.any((d >= eps / 2 - SEPARATION_TOL) & (d < 2.5 * eps), axis=1)))


def separated_set(n: int, eps: float, mesh_density: float = 64.0) -> np.ndarray:
    """A maximal eps-separated subset of S^{n-1} (rows are unit vectors).

    On S^1 the maximal set is the regular polygon with the most vertices whose
    side is at least eps; elsewhere a greedy pass over a deterministic mesh of
    ``mesh_density * eps^{1-n}`` points is used.  Raises MeshTooCoarse when the
    covering property fails on a finer test mesh.
    """
    if n < 2:
        raise DimensionMismatch("need n >= 2")
    if not 0 < eps <= 2:
        raise BadParameters("eps must lie in (0, 2]")
    if n == 2:
        theta = 2 * np.arcsin(min(eps / 2, 1.0))
        m = max(int(np.floor(2 * np.pi / theta * (1 + 1e-12))), 2)
        a = 2 * np.pi * np.arange(m) / m
        centers = np.stack([np.cos(a), np.sin(a)], axis=1)
    else:
        M = int(np.ceil(mesh_density * eps ** (1 - n)))
        centers = _greedy(_sphere_mesh(n, M), eps)
    test = _sphere_mesh(n, min(int(np.ceil(4 * mesh_density * eps ** (1 - n))), 200_000) + 1)
    if eps <= 1 and not covering_holds(centers, eps, test):
        raise MeshTooCoarse(f"covering check failed for n={n}, eps={eps}; raise mesh_density")
    return centers


@dataclass(frozen=True, eq=False)
class SphericalPartition:
    """chi_{eps,v}(xi) = phi(|xi/|xi| - v| / eps) / sum_v' phi(...)."""

    n: int
    eps: float
    centers: np.ndarray = field(repr=False)

    @property
    def constant(self) -> float:
        """|I_eps| eps^{n-1}."""
        return len(self.centers) * self.eps ** (self.n - 1)

    def _raw(self, xi):
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        nr = np.linalg.norm(xi, axis=1, keepdims=True)
        if np.any(nr == 0):
            raise ZeroEta("the partition is undefined at 0")
        d = np.linalg.norm((xi / nr)[:, None, :] - self.centers[None], axis=2)
        return phi_radial(d / self.eps)

    def values(self, xi) -> np.ndarray:
        """All chi_{eps,v}(xi), shape (len(xi), |I_eps|)."""
        raw = self._raw(xi)
        return raw / raw.sum(axis=1, keepdims=True)

    def chi(self, index: int, xi) -> np.ndarray:
        return self.values(xi)[:, index]


def spherical_partition(n: int, eps: float, mesh_density: float = 64.0) -> SphericalPartition:
    return SphericalPartition(n, float(eps), separated_set(n, eps, mesh_density))


def partition_derivative_constants(eps: float, h_rel: float = 1e-3, samples: int = 2000, seed: int = 0) -> dict:
    """Largest |d^alpha chi_{eps,v}| |xi|^{|alpha|} eps^{|alpha| - alpha_1} over sampled xi, |alpha| <= 2.

    Derivatives are central differences along the frame (v, v_perp) of the
    first center, sampled on its support.
    """
    part = spherical_partition(2, eps)
    v = part.centers[0]
    vp = np.array([-v[1], v[0]])
    rng = np.random.default_rng(seed)
    ang = rng.uniform(-4.2 * eps, 4.2 * eps, samples)
    rad = rng.uniform(0.5, 2.0, samples)
    base = rad[:, None] * (np.cos(ang)[:, None] * v + np.sin(ang)[:, None] * vp)
    f = lambda p: part.chi(0, p)
    out = {}
    for a1, a2 in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]:
        h = h_rel * eps * rad[:, None]
        if (a1, a2) == (1, 0):
            d = (f(base + h * v) - f(base - h * v)) / (2 * h[:, 0])
        elif (a1, a2) == (0, 1):
            d = (f(base + h * vp) - f(base - h * vp)) / (2 * h[:, 0])
        elif (a1, a2) == (2, 0):
            d = (f(base + h * v) - 2 * f(base) + f(base - h * v)) / h[:, 0] ** 2
        elif (a1, a2) == (0, 2):
            d = (f(base + h * vp) - 2 * f(base) + f(base - h * vp)) / h[:, 0] ** 2
        else:
            d = (f(base + h * (v + vp)) - f(base + h * (v - vp)) - f(base - h * (v - vp)) + f(base - h * (v + vp))) / (4 * h[:, 0] ** 2)
        k = a1 + a2
        out[(a1, a2)] = float(np.max(np.abs(d) * rad**k * eps ** (k - a1)))
    return out


# -- the (37D) cone ------------------------------------------------------------

def _as_etas(eta):
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    if eta.shape[1] != 3:
        raise DimensionMismatch("eta must have three components")
    nr = np.linalg.norm(eta, axis=1)
    if np.any(nr == 0):
        raise ZeroEta("eta = 0")
    return eta, nr


def cone_ratio(G: StratifiedGroup, eta, S: np.ndarray | None = None) -> np.ndarray:
    """g(eta) = b_1 b_2 / |eta|^2 = |pf J_eta| / |eta|^2; ``S`` is a precomputed Pfaffian form."""
    eta, nr = _as_etas(eta)
    S = pfaffian_form(G) if S is None else S
    return np.abs(np.einsum("si,ij,sj->s", eta, S, eta)) / nr**2


def region_membership(G: StratifiedGroup, eta, c_hat: float = C_HAT) -> np.ndarray:
    """Per eta one of "Omega_c", "Omega_p", "both", "neither"."""
    g = cone_ratio(G, eta)
    in_c, in_p = g < c_hat, g > c_hat / 2
    return np.where(in_c & in_p, "both", np.where(in_c, "Omega_c", np.where(in_p, "Omega_p", "neither")))


def containment_holds(G: StratifiedGroup, c_hat: float, samples: int = 100_000, seed: int = 0) -> bool:
    """Check Omega_c inside {b_2 < b_1/2} on seeded random unit eta."""
    from .spectral import four_dim_batch

    eta = np.random.default_rng(seed).standard_normal((samples, 3))
    eta /= np.linalg.norm(eta, axis=1, keepdims=True)
    g = cone_ratio(G, eta)
    b, _ = four_dim_batch(j_matrix(G, eta))
    sel = g < c_hat
    return bool(np.all(b[sel, 1] < b[sel, 0] / 2))


def choose_c_hat(G: StratifiedGroup, samples: int = 100_000, seed: int = 0, max_m: int = 20) -> float:
    """Largest dyadic 2^-m <= 1/4 for which the containment check passes."""
    for m in range(2, max_m + 1):
        c = 2.0**-m
        if containment_holds(G, c, samples, seed):
            return c
    raise BadParameters("no dyadic constant passes the containment check")


def zeta_c(G, eta, c_hat: float = C_HAT, S=None):
    """Degree-0 cutoff, 1 where g <= c_hat/2 and 0 where g >= c_hat."""
    g = cone_ratio(G, eta, S)
    return 1.0 - smooth_step((g - c_hat / 2) / (c_hat / 2))


def zeta_p(G, eta, c_hat: float = C_HAT, S=None):
    return 1.0 - zeta_c(G, eta, c_hat, S)


def zeta_pm(G, eta, sign: int, c_hat: float = C_HAT, S=None):
    """zeta_c restricted to {sign * eta_3 > 0}; smooth since zeta_c vanishes near eta_3 = 0."""
    eta, _ = _as_etas(eta)
    return zeta_c(G, eta, c_hat, S) * (sign * eta[:, 2] > 0)


@dataclass(frozen=True)
class SectorFrame:
    v: tuple
    s: int
    basis: np.ndarray = field(repr=False)

    def coords(self, eta) -> np.ndarray:
        """(eta_1^q, eta_2^q, eta_3^q) for rows of ``eta``."""
        return np.atleast_2d(np.asarray(eta, dtype=float)) @ self.basis.T

    def dual_coords(self, u) -> np.ndarray:
        """Coordinates on the second layer dual to ``coords`` (the basis is orthonormal)."""
        return np.atleast_2d(np.asarray(u, dtype=float)) @ self.basis.T


def sector_frame(v, s: int) -> SectorFrame:
    v = np.asarray(v, dtype=float)
    if v.shape != (2,) or abs(np.linalg.norm(v) - 1) > 1e-12:
        raise NotUnit(f"v must be a unit 2-vector, got {v}")
    if s not in (1, -1):
        raise BadParameters("s must be +1 or -1")
    vp = np.array([-v[1], v[0]])
    r2 = np.sqrt(0.5)
    basis = np.array([[v[0] * r2, v[1] * r2, s * r2], [vp[0], vp[1], 0.0], [v[0] * r2, v[1] * r2, -s * r2]])
    return SectorFrame((float(v[0]), float(v[1])), int(s), basis)


@dataclass(frozen=True, eq=False)
class PartitionPiece:
    """A cutoff in eta with values in [0, 1].

    ``box`` (optional) returns, for each support point, the ratios whose
    two-sided bound defines the support box.
    """

    kind: str
    params: dict
    func: Callable = field(repr=False)
    box: Callable | None = field(default=None, repr=False)
    frame: np.ndarray | None = field(default=None, repr=False)

    def __call__(self, eta):
        eta = np.atleast_2d(np.asarray(eta, dtype=float))
        out = np.zeros(len(eta))
        nz = np.linalg.norm(eta, axis=1) > 0
        if nz.any():
            out[nz] = self.func(eta[nz])
        return out

    def joint(self, eta):
        """Single-eta evaluation, for use as a multiplier joint factor."""
        return float(self(np.asarray(eta, dtype=float)[None])[0])

    def label(self) -> str:
        return self.kind + "(" + ",".join(f"{k}={v}" for k, v in sorted(self.params.items())) + ")"


def sector_partition(delta: float, s_hat: float = S_HAT) -> SphericalPartition:
    """The S^1 partition with thinness s_hat * delta^{1/2}."""
    return spherical_partition(2, s_hat * np.sqrt(delta))


def cone_sector_cutoff(G: StratifiedGroup, rho: float, delta: float, index: int, sign: int,
                       c_hat: float = C_HAT, s_hat: float = S_HAT, part: SphericalPartition | None = None) -> PartitionPiece:
    """zeta_{c,rho,delta,q} for q = (center ``index`` of the delta-partition, ``sign``)."""
    if not rho > 0 or not 0 < delta <= 1:
        raise BadParameters("need rho > 0 and 0 < delta <= 1")
    part = part or sector_partition(delta, s_hat)
    if not 0 <= index < len(part.centers):
        raise BadParameters(f"sector index {index} out of range")
    v = part.centers[index]
    frame = sector_frame(v, sign)
    S = pfaffian_form(G)

    def func(eta):
        nr = np.linalg.norm(eta, axis=1)
        val = zeta_pm(G, eta, sign, c_hat, S) * dyadic_chi(cone_ratio(G, eta, S) / delta) * dyadic_chi(nr / rho)
        live = val > 0
        if live.any():
            val[live] *= part.chi(index, eta[live, :2])
        return val

    def box(eta):
        q = frame.coords(eta)
        return np.abs(q) / np.array([rho, rho * np.sqrt(delta), rho * delta])

    return PartitionPiece("cone_sector", {"rho": rho, "delta": delta, "v": tuple(np.round(v, 15)), "sign": sign},
                          func, box, frame.basis)


def cone_pieces(G, rho, delta, c_hat=C_HAT, s_hat=S_HAT):
    """All sector pieces at fixed (rho, delta)."""
    part = sector_partition(delta, s_hat)
    return [cone_sector_cutoff(G, rho, delta, i, s, c_hat, s_hat, part) for i in range(len(part.centers)) for s in (1, -1)]


def radial_shell(rho: float) -> PartitionPiece:
    return PartitionPiece("radial_shell", {"rho": rho}, lambda eta: dyadic_chi(np.linalg.norm(eta, axis=1) / rho))


# -- coordinates on Omega_p --------------------------------------------------

def p_coordinates(G: StratifiedGroup, tol: float = 1e-10) -> np.ndarray:
    """Matrix A with eta^p = A eta, adapted to V_+ (+) V_- (+) W.

    V_+ (V_-) are the eta whose J_eta is self-dual (anti-self-dual); W is the
    orthogonal complement of their sum.  Rows of ``inv(A)`` are unit vectors.
    """
    if (G.d1, G.d2) != (4, 3):
        raise DimensionMismatch("p-coordinates need d1=4, d2=3")
    Js = j_matrix(G, np.eye(3))
    minus, plus = so4_split(Js)
    basis = []
    for part in (minus, plus):  # kernel of eta -> J^-_eta is V_+, and vice versa
        M = part.reshape(3, 16).T
        _, sv, vt = np.linalg.svd(M)
        rank = int(np.sum(sv > tol * max(sv.max(), 1.0)))
        basis.extend(_canonical_basis(vt[rank:]))
    B = np.array(basis).reshape(-1, 3)
    if len(B) < 3:
        W = np.linalg.svd(B)[2][len(B):] if len(B) else np.eye(3)
        B = np.vstack([B, _canonical_basis(W)])
    return np.linalg.inv(B.T)


def _canonical_basis(rows):
    """Orthonormal basis of span(rows) obtained by projecting e_1, e_2, e_3 in turn."""
    if len(rows) == 0:
        return []
    proj = rows.T @ rows
    out = []
    for e in np.eye(3):
        y = proj @ e
        for b in out:
            y = y - (b @ y) * b
        if np.linalg.norm(y) > 1e-8:
            out.append(y / np.linalg.norm(y))
        if len(out) == len(rows):
            break
    return out


def p_cutoff(G: StratifiedGroup, rho: float, deltas, c_hat: float = C_HAT, A: np.ndarray | None = None) -> PartitionPiece:
    """zeta_{p,rho,delta}(eta) = zeta_p chi(|eta|/rho) prod_l chi(|eta_l^p| / (delta_l |eta|))."""
    deltas = np.asarray(deltas, dtype=float)
    if deltas.shape != (3,) or np.any(deltas <= 0) or not rho > 0:
        raise BadParameters("need rho > 0 and three positive deltas")
    A = p_coordinates(G) if A is None else A
    S = pfaffian_form(G)

    def func(eta):
        nr = np.linalg.norm(eta, axis=1)
        ep = eta @ A.T
        val = zeta_p(G, eta, c_hat, S) * dyadic_chi(nr / rho)
        for l in range(3):
            val = val * dyadic_chi(np.abs(ep[:, l]) / (deltas[l] * nr))
        return val

    def box(eta):
        return np.abs(np.atleast_2d(eta) @ A.T) / (rho * deltas)

    return PartitionPiece("coord_box", {"rho": rho, "delta": tuple(deltas.tolist())}, func, box, A)


def _dyadic_keys(t) -> np.ndarray:
    """For t > 0 the exponents k with dyadic_chi(t / 2^k) possibly nonzero."""
    k = np.floor(np.log2(t)).astype(int)
    return np.stack([k, k + 1], axis=-1)


def covering_pieces(G: StratifiedGroup, etas, c_hat: float = C_HAT, s_hat: float = S_HAT) -> list:
    """All pieces of the cone/coordinate-box decomposition that do not vanish at every row of ``etas``.

    Every other piece vanishes at all of ``etas``, so at those points the
    returned pieces sum to 1.  Points on the cone {pf J_eta = 0} or on a
    coordinate plane eta_l^p = 0 are not covered by any finite family and
    raise BadParameters.  Groups other than d1 = 4, d2 = 3 have no cone and get
    the dyadic radial shells alone.
    """
    if (G.d1, G.d2) != (4, 3):
        etas = np.atleast_2d(np.asarray(etas, dtype=float))
        nr = np.linalg.norm(etas, axis=1)
        if np.any(nr == 0):
            raise ZeroEta("eta = 0")
        return [radial_shell(2.0**k) for k in sorted(set(_dyadic_keys(nr).ravel().tolist()))]
    etas, nr = _as_etas(etas)
    S = pfaffian_form(G)
    A = p_coordinates(G)
    g = cone_ratio(G, etas, S)
    ep = np.abs(etas @ A.T) / nr[:, None]
    zc = zeta_c(G, etas, c_hat, S)
    if np.any((zc > 0) & (g == 0)) or np.any((zc < 1) & np.any(ep == 0, axis=1)):
        raise BadParameters("some eta lie on the cone or on a coordinate plane")
    rho_k = _dyadic_keys(nr)
    pieces = []
    cone = zc > 0
    if cone.any():
        keys = set()
        del_k = _dyadic_keys(g[cone])
        for rk, dk, e in zip(rho_k[cone], del_k, etas[cone]):
            for a in rk:
                for b in dk:
                    if b <= 0:
                        keys.add((int(a), int(b), 1 if e[2] > 0 else -1))
        parts = {}
        for a, b, sign in sorted(keys):
            delta = 2.0**b
            part = parts.setdefault(b, sector_partition(delta, s_hat))
            sel = cone & (np.isin(rho_k[:, 0], [a, a - 1]))
            sel &= sign * etas[:, 2] > 0
            if not sel.any():
                continue
            used = np.flatnonzero(np.any(part.values(etas[sel, :2]) > 0, axis=0))
            for idx in used:
                pieces.append(cone_sector_cutoff(G, 2.0**a, delta, int(idx), sign, c_hat, s_hat, part))
    box = zc < 1
    if box.any():
        keys = set()
        dk = [_dyadic_keys(ep[box, l]) for l in range(3)]
        for i, rk in enumerate(rho_k[box]):
            for a in rk:
                for b1 in dk[0][i]:
                    for b2 in dk[1][i]:
                        for b3 in dk[2][i]:
                            keys.add((int(a), int(b1), int(b2), int(b3)))
        for a, *bs in sorted(keys):
            pieces.append(p_cutoff(G, 2.0**a, [2.0**b for b in bs], c_hat, A))
    live = [p for p in pieces if np.any(p(etas) != 0)]
    return live


def support_box_kappa(piece: PartitionPiece, sampler, n: int, seed: int = 0):
    """Smallest kappa with all box ratios in [1/kappa, kappa] over sampled support points.

    ``sampler(rng, n)`` draws candidate eta; returns (kappa, number of support points).
    """
    rng = np.random.default_rng(seed)
    eta = sampler(rng, n)
    vals = piece(eta)
    pts = eta[vals > 0]
    if len(pts) == 0:
        return float("nan"), 0
    r = piece.box(pts)
    with np.errstate(divide="ignore"):
        kappa = max(float(np.max(r)), float(np.max(1.0 / r)))
    return kappa, len(pts)


def cone_shell_sampler(rho: float, delta: float, c_hat: float = C_HAT):
    """Sampler of eta with |eta| in [rho/2, 2 rho] and g(eta) in [delta/2, min(2 delta, c_hat)] (G37D layout).

    It draws |eta|, g and the angle of (eta_1, eta_2) uniformly and picks the
    side of the cone and the sign of eta_3 at random, so every cone sector
    piece at (rho, delta) has its support inside the sampled set.
    """
    def sample(rng, n):
        r = rng.uniform(rho / 2, 2 * rho, n)
        g = rng.uniform(delta / 2, min(2 * delta, c_hat), n)
        side = rng.choice([-1.0, 1.0], n)
        a = np.sqrt((1 + side * g) / 2)
        c = np.sqrt((1 - side * g) / 2) * rng.choice([-1.0, 1.0], n)
        phi = rng.uniform(0, 2 * np.pi, n)
        return r[:, None] * np.stack([a * np.cos(phi), a * np.sin(phi), c], axis=1)

    return sample


def cone_support_kappa(G: StratifiedGroup, rho: float, delta: float, n: int = 200_000, seed: int = 0,
                       c_hat: float = C_HAT, s_hat: float = S_HAT) -> dict:
    """kappa over the sampled supports of all pieces zeta_{c,rho,delta,q}, q in Y_delta.

    Returns the overall kappa, the worst value of each of the three ratio
    bounds, and the number of sectors and support points seen.
    """
    part = sector_partition(delta, s_hat)
    S = pfaffian_form(G)
    eta = cone_shell_sampler(rho, delta, c_hat)(np.random.default_rng(seed), n)
    nr = np.linalg.norm(eta, axis=1)
    base = zeta_c(G, eta, c_hat, S) * dyadic_chi(cone_ratio(G, eta, S) / delta) * dyadic_chi(nr / rho)
    chis = part.values(eta[:, :2])
    scale = np.array([rho, rho * np.sqrt(delta), rho * delta])
    hi = np.zeros(3)
    lo = np.full(3, np.inf)
    pts = 0
    for sign in (1, -1):
        live = (base > 0) & (sign * eta[:, 2] > 0)
        for idx in range(len(part.centers)):
            sel = live & (chis[:, idx] > 0)
            if not sel.any():
                continue
            r = np.abs(sector_frame(part.centers[idx], sign).coords(eta[sel])) / scale
            hi = np.maximum(hi, r.max(axis=0))
            lo = np.minimum(lo, r.min(axis=0))
            pts += int(sel.sum())
    with np.errstate(divide="ignore"):
        worst = np.maximum(hi, 1.0 / lo)
    return {"kappa": float(worst.max()), "per_ratio": worst.tolist(), "sectors": 2 * len(part.centers),
            "support_points": pts}


# -- the weight w on the first layer -------------------------------------------

def weight_w(x) -> np.ndarray | float:
    """w(x) = sqrt(|x|^2 - sqrt(v1^2 + v2^2)) with v1 = x1^2 - x2^2 + x3^2 - x4^2, v2 = 2 x1 x2 + 2 x3 x4."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 4:
        raise DimensionMismatch("w is defined on R^4")
    x1, x2, x3, x4 = np.moveaxis(x, -1, 0)
    v1 = x1**2 - x2**2 + x3**2 - x4**2
    v2 = 2 * x1 * x2 + 2 * x3 * x4
    # |x|^4 - v1^2 - v2^2 = 4 (x2 x3 - x1 x4)^2, so the difference needs no cancellation
    den = np.sum(x * x, axis=-1) + np.hypot(v1, v2)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, 2 * np.abs(x2 * x3 - x1 * x4) / np.sqrt(den), 0.0)
    return float(out) if out.ndim == 0 else out


def weight_residual(G: StratifiedGroup, eta, x) -> np.ndarray:
    """|J_eta x| - |eta| w(x) for paired rows of eta and x."""
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    Jx = np.einsum("sij,sj->si", j_matrix(G, eta), x)
    return np.linalg.norm(Jx, axis=1) - np.linalg.norm(eta, axis=1) * weight_w(x)


def integrability_probe(alpha: float, gamma: float, radii=(1e5, 1e6), directions: int = 20000,
                        nodes_per_decade: int = 200, seed: int = 0) -> dict:
    """int_{|x|<R} (1+|x|)^-alpha (1+w(x))^-gamma dx on R^4 for each R.

    Polar coordinates: seeded uniform directions on S^3 for the angular mean
    and a log-spaced trapezoid rule in the radius.
    """
    rng = np.random.default_rng(seed)
    om = rng.standard_normal((directions, 4))
    om /= np.linalg.norm(om, axis=1, keepdims=True)
    wom = weight_w(om)
    area = 2 * np.pi**2
    out = {}
    for R in radii:
        n = int(nodes_per_decade * (np.log10(R) + 4)) + 1
        r = np.concatenate([[0.0], np.logspace(-4, np.log10(R), n)])
        ang = np.array([np.mean((1 + ri * wom) ** -gamma) for ri in r])
        f = r**3 * (1 + r) ** -alpha * ang * area
        out[float(R)] = float(np.trapezoid(f, r))
    return out


def ball_volume(n: int, R: float) -> float:
    return float(np.exp(0.5 * n * np.log(np.pi) - gammaln(0.5 * n + 1)) * R**n)
