import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import eval_genlaguerre

from sublap.checks import laguerre_orthogonality
from sublap.errors import GridTooCoarse, NonDecayingSamples, ValidationError
from sublap.group import builtin_group
from sublap.kernel import (
    KernelGrid,
    TruncationSpec,
    eval_V,
    n_box,
    read_nkg1,
    reparametrize,
    synthesize_kernel,
    write_nkg1,
)
from sublap.laguerre import ell_series, laguerre_derivative_check, laguerre_ell, laguerre_table
from sublap.multipliers import (
    bump_multiplier,
    func_multiplier,
    heat_multiplier,
    load_table_csv,
    multiplier_from_spec,
    table_multiplier,
    zero_multiplier,
)
from sublap.plancherel import plancherel_check_at_eta, plancherel_rhs, ratio_constant
from sublap.sobolev import default_chi, mh_condition_norm, sobolev_norm
from sublap.spectral import decompose

H1 = builtin_group("H1")
BUMP = bump_multiplier(1.0, 2.0)
# H1 grids that pass the Nyquist rule for bump(1, 2) and heat(1)
BUMP_X, BUMP_U = [(64, 0.5)] * 2, [(128, 0.5)]
HEAT_X, HEAT_U = [(32, 0.4)] * 2, [(64, 0.2)]


def mehler(t, eta, xi):
    """H1, heat e^{-t lam}: sum_n e^{-t(2n+1)|eta|} ell_n^{(0)}(|xi|^2/|eta|) summed with the Laguerre generating function."""
    a = abs(eta)
    return 0.5 / np.cosh(t * a) * np.exp(-np.sum(xi * xi, axis=-1) * np.tanh(t * a) / a)


# -- Laguerre functions ---------------------------------------------------------

def test_ell_small_cases(backend, rng):
    t = rng.uniform(0, 30, 50)
    for k in range(4):
        np.testing.assert_allclose(laguerre_ell(0, k, t), np.exp(-t), rtol=1e-14)
    assert laguerre_ell(1, 0, 1.0) == pytest.approx(np.exp(-1), rel=1e-14)
    assert laguerre_ell(-1, 2, 1.0) == 0.0


def test_ell_against_scipy(backend, rng):
    t = rng.uniform(0, 20, 200)
    tab = laguerre_table(2, t, 30)
    for n in (0, 3, 10, 30):
        ref = (-1) ** n * np.exp(-t) * eval_genlaguerre(n, 2, 2 * t)
        np.testing.assert_allclose(tab[:, n], ref, atol=1e-11 * max(1, np.max(np.abs(ref))))


def test_ell_large_arguments_stay_bounded(backend):
    tab = laguerre_table(1, np.linspace(0, 500, 101), 400)
    assert np.all(np.isfinite(tab)) and np.max(np.abs(tab)) < 1e3


def test_ell_zero_norm():
    val, _ = quad(lambda t: laguerre_ell(0, 0, t) ** 2, 0, np.inf)
    assert val == pytest.approx(0.5, abs=1e-12)


def test_orthogonality(backend):
    assert laguerre_orthogonality(backend=backend)["passed"]


def test_derivative_residuals(backend):
    assert laguerre_derivative_check(1, 0, 0.5, 1e-4) <= 1e-7
    assert laguerre_derivative_check(3, 2, 2.0, 1e-4) <= 1e-6
    assert laguerre_derivative_check(0, 0, 1.0, 1e-4) <= 1e-8
    with pytest.raises(ValueError):
        laguerre_derivative_check(1, 0, 0.1, 0.5)


def test_backends_agree(rng):
    from sublap import _backend

    if len(_backend.BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    t = rng.uniform(0, 40, 500)
    a = laguerre_table(1, t, 50, "python")
    b = laguerre_table(1, t, 50, "cython")
    np.testing.assert_allclose(a, b, atol=1e-13)
    C = rng.standard_normal((8, 6))
    t1, t2 = rng.uniform(0, 10, (2, 300))
    np.testing.assert_allclose(ell_series(C, [0, 1], [t1, t2], backend="python"),
                               ell_series(C, [0, 1], [t1, t2], backend="cython"), atol=1e-12)


# -- reparametrization and V ------------------------------------------------------------

def test_reparametrize_examples():
    F = func_multiplier(lambda lam: lam, 100.0, "identity")
    assert reparametrize(F, decompose(H1, [2.0]))([0], 0.0, [2.0]) == pytest.approx(2.0)
    assert reparametrize(BUMP, decompose(H1, [3.0]))([4], 0.0, [3.0]) == 0.0
    G = builtin_group("G37D")
    m = reparametrize(F, decompose(G, [3, 4, 2]))
    assert m([0, 0], 0.0, [3, 4, 2]) == pytest.approx(10.0, rel=1e-12)
    with pytest.raises(ValidationError):
        m([0], 0.0, [3, 4, 2])


def test_v_vanishes_outside_support(backend, rng):
    xi = rng.standard_normal((100, 2))
    assert not np.any(eval_V(BUMP, H1, [3.0], xi))
    assert not np.any(eval_V(BUMP, H1, [-3.0], xi))


def test_mehler(backend, rng):
    worst = 0.0
    for _ in range(200):
        t = rng.uniform(0.2, 3)
        a = rng.uniform(0.1, 3) / t * rng.choice([-1, 1])
        ang = rng.uniform(0, 2 * np.pi)
        xi = np.array([np.cos(ang), np.sin(ang)]) * np.sqrt(rng.uniform(0, 4) * abs(a))
        v = eval_V(heat_multiplier(t), H1, [a], xi)
        worst = max(worst, abs(v / mehler(t, a, xi) - 1))
    assert worst <= 1e-6


@pytest.mark.parametrize("name, eta", [("H1", [0.6]), ("G37D", [0.3, -0.2, 0.25]), ("N32", [0.2, 0.3, -0.1])])
def test_padding_is_bit_identical(name, eta, backend, rng):
    G = builtin_group(name)
    xi = rng.standard_normal((200, G.d1))
    base = eval_V(BUMP, G, eta, xi)
    padded = eval_V(BUMP, G, eta, xi, TruncationSpec(pad=5))
    assert base.any()
    np.testing.assert_array_equal(base, padded)


def test_n_box():
    sd = decompose(builtin_group("G37D"), [3, 4, 2])
    assert n_box(sd, 10.0) == (0, 1)
    assert n_box(sd, 5.0) == (-1, 0)


@pytest.mark.parametrize("name", ["H1", "G37D", "N32"])
def test_v_linear_and_real(name, backend, rng):
    G = builtin_group(name)
    eta = rng.standard_normal(G.d2) * 0.4
    xi = rng.standard_normal((100, G.d1))
    H1_, H2_ = bump_multiplier(0.5, 2.0), heat_multiplier(2.0)
    s = eval_V(H1_ + H2_, G, eta, xi)
    assert s.dtype == float
    np.testing.assert_allclose(s, eval_V(H1_, G, eta, xi) + eval_V(H2_, G, eta, xi), atol=1e-14)
    np.testing.assert_allclose(eval_V(heat_multiplier(2.0).dilate(3.0), G, eta, xi),
                               eval_V(heat_multiplier(6.0), G, eta, xi), atol=0)


@pytest.mark.parametrize("name", ["G37D", "N32", "HTYPE3"])
def test_v_depends_on_projection_norms_only(name, rng):
    G = builtin_group(name)
    eta = rng.standard_normal(G.d2) * 0.3
    sd = decompose(G, eta)
    xi = rng.standard_normal(G.d1)
    # rotate xi inside each spectral subspace, keeping every |P_j xi|
    parts = [Pj @ xi for Pj in sd.P] + [sd.P0 @ xi]
    Ps = list(sd.P) + [sd.P0]
    moved = np.zeros(G.d1)
    for p, P in zip(parts, Ps):
        w, vecs = np.linalg.eigh(P)
        basis = vecs[:, w > 0.5]
        if basis.shape[1] == 0:
            continue
        c = rng.standard_normal(basis.shape[1])
        moved += basis @ (c / np.linalg.norm(c)) * np.linalg.norm(p)
    H = heat_multiplier(1.0)
    assert eval_V(H, G, eta, moved) == pytest.approx(eval_V(H, G, eta, xi), abs=1e-12)


# -- kernels ------------------------------------------------------------------

def test_heat_kernel_mass(backend):
    K = synthesize_kernel(heat_multiplier(1.0), H1, HEAT_X, HEAT_U)
    assert np.max(np.abs(K.values.imag)) <= 1e-12
    c = tuple(n // 2 for n, _ in K.dims)
    assert K.values[c].real > 0
    assert abs(np.sum(K.values).real * K.cell_volume - 1.0) <= 1e-3


@pytest.mark.parametrize("name, xg, ug", [("H1", [(16, 1.0)] * 2, [(16, 1.0)]),
                                          ("G37D", [(4, 1.0)] * 4, [(4, 1.0)] * 3)])
def test_zero_multiplier_zero_grid(name, xg, ug):
    K = synthesize_kernel(zero_multiplier(), builtin_group(name), xg, ug)
    assert not np.any(K.values)


def test_kernel_linear(backend):
    A, B = bump_multiplier(1.0, 2.0), bump_multiplier(0.5, 1.5)
    KA = synthesize_kernel(A, H1, BUMP_X, BUMP_U)
    KB = synthesize_kernel(B, H1, BUMP_X, BUMP_U)
    KS = synthesize_kernel(A + B, H1, BUMP_X, BUMP_U)
    np.testing.assert_allclose(KS.values, KA.values + KB.values, atol=1e-15)


def test_grid_too_coarse():
    with pytest.raises(GridTooCoarse):
        synthesize_kernel(BUMP, H1, [(16, 3.0)] * 2, [(16, 0.5)])
    with pytest.raises(GridTooCoarse):
        synthesize_kernel(BUMP, H1, [(16, 0.5)] * 2, [(16, 3.0)])
    with pytest.raises(ValidationError):
        synthesize_kernel(BUMP, H1, [(15, 0.5)] * 2, [(16, 0.5)])


def test_kernel_plancherel_consistency():
    K = synthesize_kernel(BUMP, H1, BUMP_X, BUMP_U)
    lhs = float(np.sum(np.abs(K.values) ** 2) * K.cell_volume)
    assert lhs == pytest.approx(plancherel_rhs(BUMP, H1, {"n": 2048}), rel=0.02)


def test_threads_bit_identical():
    a = synthesize_kernel(BUMP, H1, [(32, 0.5)] * 2, [(32, 0.5)], threads=1)
    b = synthesize_kernel(BUMP, H1, [(32, 0.5)] * 2, [(32, 0.5)], threads=3)
    np.testing.assert_array_equal(a.values, b.values)


def test_nkg1_round_trip(tmp_path, rng):
    vals = rng.standard_normal((4, 6, 2)) + 1j * rng.standard_normal((4, 6, 2))
    K = KernelGrid(H1, ((4, 0.5), (6, 0.25)), ((2, 1.5),), vals)
    p = tmp_path / "k.nkg1"
    write_nkg1(p, K)
    raw = p.read_bytes()
    assert raw[:4] == b"NKG1" and len(raw) == 4 + 4 + 3 * 12 + vals.size * 16
    dims, back = read_nkg1(p)
    assert dims == [(4, 0.5), (6, 0.25), (2, 1.5)]
    np.testing.assert_array_equal(back, vals)


# -- Plancherel -----------------------------------------------------------------

def test_plancherel_both_zero():
    chk = plancherel_check_at_eta(zero_multiplier(), H1, [1.0])
    assert chk.status == "both-zero" and (chk.lhs, chk.rhs) == (0.0, 0.0)
    chk = plancherel_check_at_eta(BUMP, H1, [5.0])
    assert chk.status == "both-zero"


def test_plancherel_ratio_h1(backend, rng):
    ratios = []
    for _ in range(3):
        eta = rng.uniform(0.3, 1.5) * rng.choice([-1, 1])
        ratios.append(plancherel_check_at_eta(BUMP, H1, [eta], {"kind": "grid", "n": 256}).ratio)
    assert max(ratios) / min(ratios) - 1 <= 0.005
    assert np.mean(ratios) == pytest.approx(ratio_constant((1,)), rel=0.005)


def test_plancherel_ratio_g37d(rng):
    G = builtin_group("G37D")
    ratios = []
    for i in range(3):
        eta = rng.standard_normal(3)
        eta *= rng.uniform(0.3, 0.6) / np.linalg.norm(eta)
        chk = plancherel_check_at_eta(BUMP, G, eta, {"kind": "mc", "samples": 2_000_000, "seed": i, "margin": 10})
        if chk.status == "ok":
            ratios.append(chk.ratio)
    assert len(ratios) == 3
    assert max(ratios) / min(ratios) - 1 <= 0.02


def test_plancherel_rhs():
    assert plancherel_rhs(zero_multiplier(), H1) == 0.0
    a, b = plancherel_rhs(BUMP, H1, {"n": 256}), plancherel_rhs(BUMP, H1, {"n": 1024})
    assert a > 0 and abs(a / b - 1) <= 1e-3
    N32 = builtin_group("N32")
    c = plancherel_rhs(BUMP, N32, {"kind": "grid", "n": 16})
    d = plancherel_rhs(BUMP, N32, {"kind": "grid", "n": 32})
    assert c > 0 and abs(c / d - 1) <= 0.05


# -- multipliers ----------------------------------------------------------------

def test_bump_shape():
    lam = np.linspace(0, 3, 301)
    v = BUMP.eval(lam)
    assert np.all(v[(lam <= 1) | (lam >= 2)] == 0) and v[150] == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        bump_multiplier(2, 1)


def test_table_csv(tmp_path):
    p = tmp_path / "f.csv"
    lam = np.linspace(0, 3, 31)
    rows = "\n".join(f"{float(l)!r},{float(np.sin(l))!r},0" for l in lam)
    p.write_text("lambda,re,im\n" + rows + "\n")
    F = load_table_csv(p)
    np.testing.assert_allclose(F.eval(lam), np.sin(lam), atol=1e-15)
    assert F.eval(np.array([3.5]))[0] == 0
    assert multiplier_from_spec(str(p)).kind == "table"
    bad = tmp_path / "g.csv"
    bad.write_text("x,y\n1,2\n")
    with pytest.raises(ValidationError):
        load_table_csv(bad)
    with pytest.raises(ValidationError):
        table_multiplier([0, 1, 3], [1, 1, 1])


def test_multiplier_specs():
    assert multiplier_from_spec({"kind": "heat", "t": 2}).params["t"] == 2
    s = multiplier_from_spec({"kind": "sum", "terms": [{"kind": "bump"}, "zero"]})
    assert s.kind == "sum"
    with pytest.raises(ValidationError):
        multiplier_from_spec({"kind": "nope"})


# -- Sobolev norms ---------------------------------------------------------------

def test_sobolev_gaussian():
    lam = np.linspace(-20, 20, 4001)
    assert sobolev_norm(np.exp(-lam**2 / 2), 0.0, lam[1] - lam[0]) == pytest.approx(np.pi**0.25, rel=1e-10)


def test_sobolev_parseval_and_monotone(rng):
    lam = np.linspace(0, 3, 1024)
    F = default_chi(lam) * (1 + rng.standard_normal() * lam)
    h = lam[1] - lam[0]
    assert sobolev_norm(F, 0, h) == pytest.approx(np.sqrt(np.sum(F**2) * h), rel=1e-10)
    vals = [sobolev_norm(F, s, h) for s in (0.25, 0.5, 1, 2, 4)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    with pytest.raises(NonDecayingSamples):
        sobolev_norm(np.ones(16), 1, 0.1)


def test_mh_norm_examples():
    ts = [2.0**k for k in range(-3, 4)]
    lam = np.linspace(0, 2.5, 4096)
    chi_norm = sobolev_norm(default_chi(lam), 2, lam[1] - lam[0])
    assert mh_condition_norm(lambda l: np.ones_like(l), 2, ts) == pytest.approx(chi_norm, rel=1e-12)
    lin = [mh_condition_norm(lambda l: l, 1, [t]) for t in ts]
    assert np.argmax(lin) == len(ts) - 1
    np.testing.assert_allclose(np.array(lin) / np.array(ts), lin[0] / ts[0], rtol=1e-12)
    narrow = mh_condition_norm(BUMP, 2, [2.0**k for k in range(-6, 7)])
    wide = mh_condition_norm(BUMP, 2, [2.0**k for k in range(-10, 11)])
    assert np.isfinite(narrow) and wide == pytest.approx(narrow, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.05, 5.0))
def test_heat_dilation_composes(a, b):
    np.testing.assert_allclose(heat_multiplier(1.0).dilate(a).dilate(b).params["t"], a * b, rtol=1e-15)
