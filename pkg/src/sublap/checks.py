"""Self-contained numerical checks shared by the command line and the test suite.

Each check returns a JSON-ready dict with the measured quantities, the
threshold used and a boolean ``passed``.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln, roots_genlaguerre

from .decomposition import cone_support_kappa, spherical_partition, weight_residual
from .group import StratifiedGroup, builtin_group
from .laguerre import laguerre_table
from .multipliers import bump_multiplier
from .plancherel import plancherel_check_at_eta, ratio_constant
from .spectral import decompose


def laguerre_orthogonality(N: int = 8, ks=(0, 1, 2), nodes: int = 40, backend=None, tol: float = 1e-8) -> dict:
    """int_0^infty ell_n^{(k)} ell_m^{(k)} t^k dt against (n+k)!/(2^{k+1} n!) delta_nm for n, m <= N.

    With s = 2t the integral is 2^{-k-1} int L_n^{(k)} L_m^{(k)} s^k e^{-s} ds,
    done by generalized Gauss-Laguerre quadrature (exact for these degrees).
    The values L_n^{(k)}(s) are recovered from the tabulated ell_n^{(k)}(s/2).
    """
    worst = 0.0
    for k in ks:
        s, w = roots_genlaguerre(nodes, k)
        ell = laguerre_table(k, s / 2, N, backend)
        L = ell * np.exp(s / 2)[:, None] * (-1.0) ** np.arange(N + 1)
        gram = 2.0 ** (-k - 1) * (L * w[:, None]).T @ L
        n = np.arange(N + 1)
        exact = np.diag(np.exp(gammaln(n + k + 1) - gammaln(n + 1)) / 2.0 ** (k + 1))
        worst = max(worst, float(np.max(np.abs(gram - exact))))
    return {"check": "laguerre", "N": N, "ks": list(ks), "max_abs_error": worst, "tol": tol, "passed": worst <= tol}


def _random_eta(rng, d2):
    v = rng.standard_normal(d2)
    return v / np.linalg.norm(v) * rng.uniform(0.3, 1.5)


def plancherel_constancy(group="H1", pairs: int = 20, xi_quadrature: dict | None = None, seed: int = 0,
                         tol: float | None = None) -> dict:
    """lhs/rhs of `plancherel_check_at_eta` over random (eta, F = bump(a, b)) pairs.

    The spread is max/min - 1; ``expected`` is the constant (pi/2)^{|r|}.
    """
    G = group if isinstance(group, StratifiedGroup) else builtin_group(group)
    rng = np.random.default_rng(seed)
    quad = xi_quadrature or {"kind": "grid", "n": 256}
    if tol is None:
        tol = 0.005 if G.d1 == 2 else 0.02
    ratios = []
    i = 0
    while len(ratios) < pairs:
        eta = _random_eta(rng, G.d2)
        a = rng.uniform(0.5, 2.0)
        F = bump_multiplier(a, a + rng.uniform(0.5, 2.0))
        q = dict(quad)
        q.setdefault("seed", seed * 1000 + i)
        i += 1
        chk = plancherel_check_at_eta(F, G, eta, q)
        if chk.status == "ok":  # pairs with no spectral point in supp F carry no information
            ratios.append(chk.ratio)
    ratios = np.array(ratios)
    spread = float(ratios.max() / ratios.min() - 1)
    expected = ratio_constant(decompose(G, _random_eta(np.random.default_rng(seed), G.d2)).r)
    return {"check": "plancherel", "group": G.name, "pairs": pairs, "ratios": ratios.tolist(), "spread": spread,
            "expected": expected, "max_rel_to_expected": float(np.max(np.abs(ratios / expected - 1))),
            "tol": tol, "passed": spread <= tol}


def weight_inequality(samples: int = 100_000, seed: int = 0, tol: float = 1e-10, eq_tol: float = 1e-12) -> dict:
    """min of |J_eta x| - |eta| w(x) on G37D, plus the equality case x=(1,0,0,1), eta=(0,0,1)."""
    G = builtin_group("G37D")
    rng = np.random.default_rng(seed)
    eta = rng.standard_normal((samples, 3))
    x = rng.standard_normal((samples, 4))
    res = weight_residual(G, eta, x)
    eq = float(abs(weight_residual(G, np.array([[0.0, 0.0, 1.0]]), np.array([[1.0, 0.0, 0.0, 1.0]]))[0]))
    mn = float(res.min())
    return {"check": "weight", "samples": samples, "min_residual": mn, "equality_residual": eq,
            "tol": tol, "passed": mn >= -tol and eq <= eq_tol}


def partition_of_unity(eps_list=(2**-1, 2**-2, 2**-3, 2**-4, 2**-5), points: int = 10_000, seed: int = 0,
                       tol: float = 1e-12) -> dict:
    """Sum = 1, support annulus eps/4 <= |xi/|xi| - v| <= 4 eps, and |I_eps| eps stable within a factor 2 (n = 2)."""
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((points, 2)) * rng.uniform(0.1, 10, (points, 1))
    unit = xi / np.linalg.norm(xi, axis=1, keepdims=True)
    rows = []
    for eps in eps_list:
        part = spherical_partition(2, eps)
        vals = part.values(xi)
        sum_err = float(np.max(np.abs(vals.sum(axis=1) - 1)))
        d = np.linalg.norm(unit[:, None, :] - part.centers[None], axis=2)
        on = vals > 0
        annulus = bool(np.all((d[on] >= eps / 4 * (1 - 1e-12)) & (d[on] <= 4 * eps * (1 + 1e-12))))
        rows.append({"eps": eps, "count": len(part.centers), "count_times_eps": len(part.centers) * eps,
                     "sum_error": sum_err, "annulus": annulus})
    c = np.array([r["count_times_eps"] for r in rows])
    stable = bool(c.max() / c.min() <= 2)
    ok = stable and all(r["sum_error"] <= tol and r["annulus"] for r in rows)
    return {"check": "partition", "rows": rows, "count_ratio": float(c.max() / c.min()), "tol": tol, "passed": ok}


def cone_box_kappa(rho_list=(1.0,), delta_list=(2**-2, 2**-4, 2**-6), samples: int = 200_000, seed: int = 0,
                   limit: float = 64.0) -> dict:
    """A single kappa for the support-box ratios of every cone sector piece in the configurations."""
    G = builtin_group("G37D")
    rows = []
    for rho in rho_list:
        for delta in delta_list:
            rows.append({"rho": rho, "delta": delta, **cone_support_kappa(G, rho, delta, samples, seed)})
    kappa = max(r["kappa"] for r in rows)
    return {"check": "kappa", "rows": rows, "kappa": kappa, "limit": limit, "passed": kappa <= limit}


CHECKS = {
    "laguerre": laguerre_orthogonality,
    "plancherel": plancherel_constancy,
    "weight": weight_inequality,
    "partition": partition_of_unity,
}
