"""Plancherel identity for kernels of joint functional calculus.

Per eta, Laguerre orthogonality and polar coordinates on each 2 r_j-block give

    int |V(xi, eta)|^2 dxi = (pi/2)^{|r|} * sum_n int |m_H(n, mu, eta)|^2 dsigma_{r0}(mu)
                                         * prod_j b_j^{r_j} binom(n_j + r_j - 1, n_j),

so ``plancherel_check_at_eta`` returns the ratio (pi/2)^{|r|}, whatever r0 is.
Integrating over eta and using the kernel prefactor 2^{|r|} (2 pi)^{-dim G}
yields ||K||_2^2 = (2 pi)^{|r| - dim G} int (right-hand side) deta.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, roots_jacobi, roots_legendre

from .errors import ClusterAmbiguous, SingularEta, ValidationError
from .group import StratifiedGroup
from .kernel import TruncationSpec, _binom_weights, eta_radius, eval_V_sd, n_box, spectral_points
from .multipliers import Multiplier
from .spectral import SpectralData, batch_regular, decompose, generic_profile


def ratio_constant(r) -> float:
    """The per-eta ratio lhs/rhs, (pi/2)^{|r|}."""
    return (np.pi / 2.0) ** int(sum(r))


def sigma_density(mu, r0: int):
    """Density of sigma_{r0}: pi^{r0/2}/Gamma(r0/2) mu^{r0/2 - 1}."""
    mu = np.asarray(mu, dtype=float)
    return np.exp(0.5 * r0 * np.log(np.pi) - gammaln(0.5 * r0)) * mu ** (0.5 * r0 - 1.0)


def _mu_integral(H: Multiplier, lam_n: float, eta, r0: int, Lam: float, nodes: int) -> float:
    """int_0^infty |H(lam_n + mu, eta)|^2 dsigma_{r0}(mu)."""
    lo, hi = H.support_interval
    top = min(Lam, hi) - lam_n
    if top <= 0:
        return 0.0
    c = np.exp(0.5 * r0 * np.log(np.pi) - gammaln(0.5 * r0))
    beta = 0.5 * r0 - 1.0
    start = lo - lam_n
    if start > 0:
        # bump away from mu = 0: the density is smooth there
        x, w = roots_legendre(nodes)
        mu = start + (top - start) * (x + 1) / 2
        vals = np.abs(H.H(mu + lam_n, eta)) ** 2 * mu**beta
        return float(c * (top - start) / 2 * np.dot(w, vals))
    x, w = roots_jacobi(nodes, 0.0, beta)
    mu = top * (x + 1) / 2
    vals = np.abs(H.H(mu + lam_n, eta)) ** 2
    return float(c * (top / 2) ** (beta + 1) * np.dot(w, vals))


def plancherel_per_eta(H: Multiplier, sd: SpectralData, eta, trunc: TruncationSpec | None = None) -> float:
    """sum_n int |m_H(n, mu, eta)|^2 dsigma_{r0}(mu) prod_j b_j^{r_j} binom(n_j + r_j - 1, n_j)."""
    trunc = trunc or TruncationSpec()
    if H.is_zero:
        return 0.0
    Lam = trunc.bound(H)
    box = n_box(sd, Lam, trunc.pad)
    if any(n < 0 for n in box):
        return 0.0
    lam = spectral_points(sd, box)
    w = _binom_weights(sd, box)
    if not sd.r0:
        return float(np.sum(np.abs(H.H(lam, eta)) ** 2 * w))
    flat = lam.ravel()
    vals = np.array([_mu_integral(H, float(l), eta, sd.r0, Lam, trunc.mu_nodes) for l in flat])
    return float(np.sum(vals * w.ravel()))


@dataclass(frozen=True)
class PlancherelCheck:
    lhs: float
    rhs: float
    ratio: float
    status: str  # "ok" or "both-zero"


def xi_box_radius(H: Multiplier, sd: SpectralData, margin: float = 40.0) -> float:
    """Half-width of a xi box outside which |V|^2 is negligible."""
    return float(np.sqrt(H.nyquist_bound(1e-12) + margin * max(sd.b)))


def xi_integral(H: Multiplier, sd: SpectralData, eta, quad: dict, trunc: TruncationSpec | None = None) -> float:
    """int |V(xi, eta)|^2 dxi by a midpoint product grid on a box or seeded Monte Carlo on a ball."""
    d1 = sd.P.shape[-1]
    kind = quad.get("kind", "grid")
    R = float(quad.get("R") or xi_box_radius(H, sd, quad.get("margin", 40.0)))
    if kind == "grid":
        n = int(quad.get("n", 256))
        h = 2 * R / n
        ax = -R + (np.arange(n) + 0.5) * h
        total = 0.0
        # stream over the first axis to bound memory
        rest = np.stack(np.meshgrid(*([ax] * (d1 - 1)), indexing="ij"), axis=-1).reshape(-1, d1 - 1) if d1 > 1 else np.zeros((1, 0))
        for a in ax:
            xi = np.concatenate([np.full((rest.shape[0], 1), a), rest], axis=1)
            total += float(np.sum(np.abs(eval_V_sd(H, sd, eta, xi, trunc)) ** 2))
        return total * h**d1
    if kind == "mc":
        N = int(quad.get("samples", 1_000_000))
        chunk = int(quad.get("chunk", 1 << 18))
        seed = int(quad.get("seed", 0))
        acc = 0.0
        for i, s0 in enumerate(range(0, N, chunk)):
            m = min(chunk, N - s0)
            rng = np.random.default_rng([seed, i])
            g = rng.standard_normal((m, d1))
            rad = R * rng.uniform(size=(m, 1)) ** (1.0 / d1)
            xi = g / np.linalg.norm(g, axis=1, keepdims=True) * rad
            acc += float(np.sum(np.abs(eval_V_sd(H, sd, eta, xi, trunc)) ** 2))
        ball = np.pi ** (d1 / 2) / np.exp(gammaln(d1 / 2 + 1)) * R**d1
        return float(acc / N * ball)
    raise ValidationError(f"unknown xi quadrature {kind!r}")


def plancherel_check_at_eta(H: Multiplier, G: StratifiedGroup, eta, xi_quadrature: dict | None = None,
                            trunc: TruncationSpec | None = None) -> PlancherelCheck:
    """(lhs, rhs, ratio) with lhs = int |V|^2 dxi; ratio should equal ``ratio_constant(r)``."""
    try:
        sd = decompose(G, eta)
    except ClusterAmbiguous as exc:
        raise SingularEta(str(exc)) from exc
    rhs = plancherel_per_eta(H, sd, eta, trunc)
    lhs = 0.0 if H.is_zero or rhs == 0 else xi_integral(H, sd, eta, xi_quadrature or {}, trunc)
    if rhs == 0 and lhs == 0:
        return PlancherelCheck(0.0, 0.0, 0.0, "both-zero")
    return PlancherelCheck(lhs, rhs, lhs / rhs if rhs else float("inf"), "ok")


def plancherel_rhs(H: Multiplier, G: StratifiedGroup, eta_quadrature: dict | None = None,
                   trunc: TruncationSpec | None = None) -> float:
    """(2 pi)^{|r| - dim G} int plancherel_per_eta d eta.

    ``eta_quadrature`` is ``{"kind": "grid", "n": ...}`` (midpoint product grid
    on [-R, R]^{d2}) or ``{"kind": "mc", "samples": ..., "seed": ...}``;
    R defaults to the radius beyond which every spectral point exceeds the
    support bound.
    """
    if H.is_zero:
        return 0.0
    q = dict(eta_quadrature or {})
    kind = q.get("kind", "grid")
    trunc = trunc or TruncationSpec()
    R = float(q.get("R") or eta_radius(G, trunc.bound(H)))
    if kind == "grid":
        n = int(q.get("n", 64))
        h = 2 * R / n
        ax = -R + (np.arange(n) + 0.5) * h
        etas = np.stack(np.meshgrid(*([ax] * G.d2), indexing="ij"), axis=-1).reshape(-1, G.d2)
        weight = h**G.d2
    elif kind == "mc":
        N = int(q.get("samples", 10_000))
        etas = np.random.default_rng(int(q.get("seed", 0))).uniform(-R, R, size=(N, G.d2))
        weight = (2 * R) ** G.d2 / N
    else:
        raise ValidationError(f"unknown eta quadrature {kind!r}")
    profile = generic_profile(G)
    ok, b, P, P0 = batch_regular(G, etas, profile)
    total = 0.0
    for i in range(len(etas)):
        if ok[i]:
            sd = SpectralData(profile.done, b[i], tuple(profile.r), profile.r0, P[i], P0[i])
        else:
            try:
                sd = decompose(G, etas[i])
            except (ClusterAmbiguous, ValidationError):
                continue
        total += plancherel_per_eta(H, sd, etas[i], trunc)
    return (2 * np.pi) ** (sum(profile.r) - G.dim) * total * weight
