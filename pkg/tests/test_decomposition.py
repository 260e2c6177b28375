import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sublap.checks import partition_of_unity, weight_inequality
from sublap.decomposition import (
    C_HAT,
    S_HAT,
    choose_c_hat,
    cone_pieces,
    cone_sector_cutoff,
    cone_shell_sampler,
    cone_support_kappa,
    containment_holds,
    covering_pieces,
    dyadic_chi,
    integrability_probe,
    p_coordinates,
    p_cutoff,
    partition_derivative_constants,
    phi_radial,
    radial_shell,
    region_membership,
    sector_frame,
    sector_partition,
    separated_set,
    smooth_step,
    spherical_partition,
    support_box_kappa,
    weight_residual,
    weight_w,
    zeta_c,
    zeta_p,
    zeta_pm,
)
from sublap.errors import BadParameters, NotUnit, ZeroEta
from sublap.group import builtin_group, j_matrix, pfaffian

G = builtin_group("G37D")
EPS = [2.0**-k for k in range(1, 6)]


def unit(rng, n, d):
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# -- smooth pieces -----------------------------------------------------------

def test_smooth_step_and_phi():
    assert smooth_step(-1.0) == 0 and smooth_step(2.0) == 1 and smooth_step(0.5) == pytest.approx(0.5)
    r = np.linspace(0, 5, 501)
    p = phi_radial(r)
    assert np.all(p[(r >= 0.5) & (r <= 2.5)] == 1)
    assert np.all(p[(r <= 0.25) | (r >= 4)] == 0)


def test_dyadic_chi_examples():
    assert dyadic_chi(1.0) + dyadic_chi(0.5) + dyadic_chi(2.0) == pytest.approx(1, abs=1e-12)
    assert dyadic_chi(0.4) == 0 and dyadic_chi(2.5) == 0


def test_dyadic_telescoping():
    t = np.logspace(-3, 3, 100)
    total = sum(dyadic_chi(2.0**n * t) for n in range(-15, 16))
    np.testing.assert_allclose(total, 1, atol=1e-12)


# -- spherical partitions -------------------------------------------------------

def test_separated_set_examples():
    c = separated_set(2, 1.0)
    assert len(c) in (6, 7)
    d = np.linalg.norm(c[:, None] - c[None], axis=2)
    assert np.min(d[np.triu_indices(len(c), 1)]) >= 1 - 1e-12
    assert len(separated_set(2, 2.0)) >= 2


@pytest.mark.parametrize("n", [2, 3])
def test_separated_and_covering(n):
    for eps in (0.5, 0.25):
        c = separated_set(n, eps)
        d = np.linalg.norm(c[:, None] - c[None], axis=2)
        assert np.min(d[np.triu_indices(len(c), 1)]) >= eps - 1e-12
        test = unit(np.random.default_rng(1), 5000, n)
        nearest = np.min(np.linalg.norm(test[:, None] - c[None], axis=2), axis=1)
        assert np.all(nearest < eps + 1e-12)


def test_count_constant_bounded():
    c = [spherical_partition(2, e).constant for e in EPS]
    assert max(c) / min(c) <= 2


def test_partition_of_unity_check():
    res = partition_of_unity()
    assert res["passed"], res


def test_partition_zero_near_center_and_homogeneous(rng):
    part = spherical_partition(2, 0.25)
    xi = rng.standard_normal((2000, 2))
    vals = part.values(xi)
    u = xi / np.linalg.norm(xi, axis=1, keepdims=True)
    d = np.linalg.norm(u[:, None] - part.centers[None], axis=2)
    assert np.all(vals[d < 0.25 / 4] == 0)
    for t in (0.5, 2.0, 8.0):  # dyadic t keeps xi / |xi| bit-identical
        np.testing.assert_array_equal(part.values(t * xi), vals)
    with pytest.raises(ZeroEta):
        part.values([[0.0, 0.0]])


def _derivative_table():
    return [partition_derivative_constants(e) for e in EPS[:4]]


@pytest.mark.xfail(strict=True, reason="eps = 1/2 has 12 centres and its constants are up to 2.7x below the "
                   "small-eps limit; see decisions ledger")
def test_derivative_constants_within_factor_two():
    table = _derivative_table()
    for key in table[0]:
        vals = [row[key] for row in table]
        assert max(vals) / min(vals) <= 2, key


def test_derivative_constants_bounded_uniformly():
    # the lemma asserts a uniform upper bound: the scaled constants settle as eps -> 0
    table = _derivative_table() + [partition_derivative_constants(2.0**-5)]
    for key in table[0]:
        vals = np.array([row[key] for row in table])
        assert np.all(np.isfinite(vals))
        assert vals[-1] / vals[-2] == pytest.approx(1, abs=0.1), key
        assert vals.max() <= 1.1 * vals[-1], key


# -- cone regions -----------------------------------------------------------------

def test_region_examples():
    assert region_membership(G, [1, 0, 1])[0] == "Omega_c"
    assert region_membership(G, [1, 0, 0])[0] == "Omega_p"
    with pytest.raises(ZeroEta):
        region_membership(G, [0, 0, 0])


def test_region_cover(rng):
    m = region_membership(G, unit(rng, 10_000, 3))
    assert not np.any(m == "neither")


def test_c_hat_choice():
    assert choose_c_hat(G) == C_HAT
    assert containment_holds(G, C_HAT)


def test_zeta_split(rng):
    eta = unit(rng, 5000, 3) * rng.uniform(0.1, 10, (5000, 1))
    np.testing.assert_allclose(zeta_c(G, eta) + zeta_p(G, eta), 1, atol=1e-12)
    zp, zm = zeta_pm(G, eta, 1), zeta_pm(G, eta, -1)
    np.testing.assert_allclose(zp + zm, zeta_c(G, eta), atol=1e-12)
    assert np.all(zp[eta[:, 2] <= 0] == 0) and np.all(zm[eta[:, 2] >= 0] == 0)
    # zeta_c vanishes near the plane eta_3 = 0, so the split is smooth
    flat = np.column_stack([eta[:, :2], 0.05 * eta[:, 2]])
    assert np.all(zeta_c(G, flat)[np.abs(flat[:, 2]) < 0.1 * np.linalg.norm(flat, axis=1)] == 0)


# -- sector frames ---------------------------------------------------------------------

def test_sector_frame_examples():
    f = sector_frame([1.0, 0.0], 1)
    q = f.coords([1.0, 0, 0])[0]
    np.testing.assert_allclose(q, [np.sqrt(0.5), 0, np.sqrt(0.5)], atol=1e-15)
    assert 2 * q[0] * q[2] + q[1] ** 2 == pytest.approx(1.0, abs=1e-15)
    q = sector_frame([0.0, 1.0], -1).coords([0, 1.0, -1.0])[0]
    np.testing.assert_allclose(q, [np.sqrt(2), 0, 0], atol=1e-15)
    with pytest.raises(NotUnit):
        sector_frame([1.0, 1.0], 1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2 * np.pi), st.sampled_from([1, -1]),
       st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3))
def test_sector_frame_properties(a, s, eta):
    f = sector_frame([np.cos(a), np.sin(a)], s)
    np.testing.assert_allclose(f.basis @ f.basis.T, np.eye(3), atol=1e-14)
    assert abs(abs(np.linalg.det(f.basis)) - 1) <= 1e-14
    q = f.coords(eta)[0]
    assert 2 * q[0] * q[2] + q[1] ** 2 == pytest.approx(pfaffian(j_matrix(G, eta)), abs=1e-12)


# -- cone sector pieces --------------------------------------------------------------------

@pytest.mark.xfail(strict=True, reason="the annular phi leaves |eta_2^q| down to s_hat/4 of its scale, "
                   "so kappa is about 90; see decisions ledger")
def test_cone_support_box_kappa_32():
    assert cone_support_kappa(G, 1.0, 2**-4, n=1000)["kappa"] <= 32


def test_cone_support_box_bounded():
    res = cone_support_kappa(G, 1.0, 2**-4, n=20_000)
    assert res["support_points"] > 0 and np.isfinite(res["kappa"])


def test_cone_piece_values_and_box(rng):
    piece = cone_sector_cutoff(G, 1.0, 2**-4, 0, 1)
    eta = cone_shell_sampler(1.0, 2**-4)(rng, 20_000)
    v = piece(eta)
    assert np.all((v >= 0) & (v <= 1)) and np.any(v > 0)
    kappa, pts = support_box_kappa(piece, cone_shell_sampler(1.0, 2**-4), 20_000)
    assert pts > 0 and kappa < 200
    # no support outside the rho shell or outside the sign half-space
    far = eta * 5
    assert not np.any(piece(far))
    flipped = eta * np.array([1, 1, -1])
    assert not np.any(piece(flipped)[eta[:, 2] > 0])


def test_cone_piece_bad_parameters():
    with pytest.raises(BadParameters):
        cone_sector_cutoff(G, 1.0, 2.0, 0, 1)
    with pytest.raises(BadParameters):
        cone_sector_cutoff(G, 1.0, 0.5, 10_000, 1)


def test_sector_pieces_sum_to_zeta_c(rng):
    eta = unit(rng, 300, 3) * rng.uniform(0.3, 3, (300, 1))
    eta = eta[zeta_c(G, eta) > 0]
    pieces = covering_pieces(G, eta)
    cone = sum(p(eta) for p in pieces if p.kind == "cone_sector")
    np.testing.assert_allclose(cone, zeta_c(G, eta), atol=1e-10)


def test_covering_pieces_sum_to_one(rng):
    eta = unit(rng, 300, 3) * rng.uniform(0.3, 3, (300, 1))
    pieces = covering_pieces(G, eta)
    np.testing.assert_allclose(sum(p(eta) for p in pieces), 1, atol=1e-10)
    assert {p.kind for p in pieces} == {"cone_sector", "coord_box"}


@pytest.mark.parametrize("name", ["H1", "N32"])
def test_covering_pieces_without_cone_are_shells(name, rng):
    H = builtin_group(name)
    eta = rng.standard_normal((300, H.d2)) * rng.uniform(0.01, 30, (300, 1))
    pieces = covering_pieces(H, eta)
    assert {p.kind for p in pieces} == {"radial_shell"}
    np.testing.assert_allclose(sum(p(eta) for p in pieces), 1, atol=1e-12)


def test_cone_pieces_at_fixed_scale(rng):
    pieces = cone_pieces(G, 1.0, 2**-3)
    assert len(pieces) == 2 * len(sector_partition(2**-3).centers)
    eta = cone_shell_sampler(1.0, 2**-3)(rng, 5000)
    total = sum(p(eta) for p in pieces)
    assert np.all(total <= 1 + 1e-12)


def test_radial_shell_and_p_cutoff(rng):
    eta = unit(rng, 2000, 3) * rng.uniform(0.1, 10, (2000, 1))
    total = sum(radial_shell(2.0**k)(eta) for k in range(-6, 7))
    np.testing.assert_allclose(total, 1, atol=1e-12)
    np.testing.assert_allclose(p_coordinates(G), np.eye(3), atol=1e-12)
    piece = p_cutoff(G, 1.0, [0.5, 0.5, 0.5])
    v = piece(eta)
    assert np.all((v >= 0) & (v <= 1)) and np.any(v > 0)
    r = piece.box(eta[v > 0])
    assert np.all((r >= 0.25 - 1e-12) & (r <= 4 + 1e-12))
    with pytest.raises(BadParameters):
        p_cutoff(G, 1.0, [0.5, 0.5])


def test_p_coordinates_are_v_plus_v_minus():
    G2 = builtin_group("G37D")
    A = p_coordinates(G2)
    B = np.linalg.inv(A).T  # rows: eta directions of the new coordinate axes
    from sublap.spectral import so4_split

    for row, expect_plus in zip(B, (True, True, False)):
        minus, plus = so4_split(j_matrix(G2, row))
        assert not np.any(np.abs(minus if expect_plus else plus) > 1e-12)


# -- weight ----------------------------------------------------------------------------

def test_weight_examples():
    assert weight_w([1.0, 0, 0, 0]) == 0
    assert weight_w([1.0, 0, 0, 1]) == pytest.approx(np.sqrt(2), abs=1e-15)
    Jx = j_matrix(G, [0, 0, 1.0]) @ np.array([1.0, 0, 0, 1])
    assert np.linalg.norm(Jx) == pytest.approx(np.sqrt(2), abs=1e-15)


def test_weight_inequality():
    res = weight_inequality()
    assert res["passed"], res


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=4, max_size=4), st.floats(0.01, 100))
def test_weight_homogeneous(x, t):
    x = np.array(x)
    assert weight_w(t * x) == pytest.approx(t * weight_w(x), rel=1e-12, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3),
       st.lists(st.floats(-10, 10, allow_nan=False), min_size=4, max_size=4))
def test_weight_inequality_property(eta, x):
    assert weight_residual(G, eta, x)[0] >= -1e-10 * max(1.0, np.linalg.norm(eta) * np.linalg.norm(x))


def test_integrability_direction():
    conv = integrability_probe(3.5, 1.0)
    vals = list(conv.values())
    assert abs(vals[1] / vals[0] - 1) <= 0.05
    div = list(integrability_probe(3.0, 0.5).values())
    assert div[1] / div[0] > 2
