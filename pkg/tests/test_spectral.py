import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sublap.errors import NotSkew, RepeatedEigenvalue, ZeroEta, ZeroMatrix
from sublap.group import builtin_group, j_matrix, pfaffian
from sublap.spectral import (
    decompose,
    four_dim_closed_form,
    generic_profile,
    hodge_star,
    projections_interpolation,
    so4_norm,
    so4_split,
)

from .conftest import two_form

GROUPS = ["H1", "H2", "N32", "G37D", "HTYPE3"]
I1 = -two_form(1, 2)  # m_12 = -1
I2 = -two_form(3, 4)  # m_34 = -1


def _check_invariants(G, eta, sd):
    J = j_matrix(G, eta)
    eye = np.eye(G.d1)
    total = sd.P0.copy()
    for j, Pj in enumerate(sd.P):
        np.testing.assert_allclose(Pj, Pj.T, atol=1e-10)
        np.testing.assert_allclose(Pj @ Pj, Pj, atol=1e-10)
        assert round(np.trace(Pj)) == 2 * sd.r[j]
        for k in range(j):
            np.testing.assert_allclose(Pj @ sd.P[k], 0, atol=1e-10)
        np.testing.assert_allclose(J @ Pj, Pj @ J, atol=1e-9)
        total = total + Pj
    np.testing.assert_allclose(total, eye, atol=1e-10)
    assert round(np.trace(sd.P0)) == sd.r0
    assert G.d1 == sd.r0 + 2 * sum(sd.r)
    assert np.all(np.diff(sd.b) < 0) and np.all(sd.b > 0)
    recon = np.einsum("j,jik->ik", sd.b**2, sd.P)
    assert np.max(np.abs(-J @ J - recon)) <= 1e-10 * np.max(np.abs(J)) ** 2
    hs = np.trace(J.T @ J)
    assert abs(sum(2 * r * b * b for r, b in zip(sd.r, sd.b)) - hs) <= 1e-10 * hs


def test_h1_example():
    sd = decompose(builtin_group("H1"), [2.0])
    assert (sd.done, list(sd.b), sd.r, sd.r0) == (1, [2.0], (1,), 0)
    np.testing.assert_allclose(sd.P[0], np.eye(2), atol=1e-14)


def test_g37d_example():
    sd = decompose(builtin_group("G37D"), [3, 4, 2])
    np.testing.assert_allclose(sd.b, [7, 3], rtol=1e-12)
    assert sd.r == (1, 1) and sd.r0 == 0


def test_n32_example():
    sd = decompose(builtin_group("N32"), [0, 0, 1])
    assert (sd.done, sd.r, sd.r0) == (1, (1,), 1)
    np.testing.assert_allclose(sd.b, [1.0], rtol=1e-12)
    np.testing.assert_allclose(sd.P0, np.diag([0, 0, 1.0]), atol=1e-14)


def test_zero_eta():
    with pytest.raises(ZeroEta):
        decompose(builtin_group("G37D"), [0, 0, 0])


@pytest.mark.parametrize("name", GROUPS)
def test_invariants_random(name, rng):
    G = builtin_group(name)
    for eta in rng.standard_normal((50, G.d2)):
        _check_invariants(G, eta, decompose(G, eta))


@pytest.mark.parametrize("name, profile", [
    ("H1", (1, 0, (1,))), ("G37D", (2, 0, (1, 1))), ("N32", (1, 1, (1,))), ("HTYPE3", (1, 0, (2,))),
])
def test_generic_profile(name, profile):
    assert generic_profile(builtin_group(name)).key == profile


def test_generic_profile_seeded():
    G = builtin_group("G37D")
    assert generic_profile(G, seed=3).witness == generic_profile(G, seed=3).witness


def test_g37d_closed_form_b(rng):
    G = builtin_group("G37D")
    for eta in rng.standard_normal((200, 3)):
        rho = np.hypot(eta[0], eta[1])
        ev = np.sqrt(np.sort(np.linalg.eigvalsh(-j_matrix(G, eta) @ j_matrix(G, eta)))[::-1][::2])
        np.testing.assert_allclose(ev, [rho + abs(eta[2]), abs(rho - abs(eta[2]))], atol=1e-10 * np.linalg.norm(eta))


@pytest.mark.parametrize("name", GROUPS)
def test_homogeneity(name, rng):
    G = builtin_group(name)
    for eta in rng.standard_normal((10, G.d2)):
        t = rng.uniform(0.1, 10)
        a, b = decompose(G, eta), decompose(G, t * eta)
        np.testing.assert_allclose(b.b, t * a.b, rtol=1e-10)
        np.testing.assert_allclose(b.P, a.P, atol=1e-10)


@pytest.mark.parametrize("name", GROUPS)
def test_charpoly(name, rng):
    G = builtin_group(name)
    for eta in rng.standard_normal((5, G.d2)):
        J = j_matrix(G, eta)
        sd = decompose(G, eta)
        for lam in rng.uniform(-3, 3, 5):
            lhs = np.linalg.det(lam * np.eye(G.d1) + J @ J)
            rhs = lam**sd.r0 * np.prod([(lam - b * b) ** (2 * r) for b, r in zip(sd.b, sd.r)])
            assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("name", GROUPS)
def test_hs_norm_parallelogram(name, rng):
    G = builtin_group(name)
    n = lambda e: np.sqrt(np.trace(j_matrix(G, e).T @ j_matrix(G, e)))
    for _ in range(20):
        a, b = rng.standard_normal((2, G.d2))
        lhs = n(a + b) ** 2 + n(a - b) ** 2
        assert lhs == pytest.approx(2 * n(a) ** 2 + 2 * n(b) ** 2, rel=1e-10)


def test_interpolation_examples():
    np.testing.assert_allclose(projections_interpolation([2.0], 4 * np.eye(2))[0], np.eye(2))
    P = projections_interpolation([2.0, 1.0], np.diag([4.0, 4, 1, 1]))
    np.testing.assert_allclose(P[0], np.diag([1.0, 1, 0, 0]), atol=1e-15)
    np.testing.assert_allclose(P[1], np.diag([0.0, 0, 1, 1]), atol=1e-15)
    with pytest.raises(RepeatedEigenvalue):
        projections_interpolation([1.0, 1.0], np.eye(4))


def test_interpolation_matches_decompose(rng):
    G = builtin_group("G37D")
    for eta in [np.array([3.0, 4, 2])] + list(rng.standard_normal((20, 3))):
        sd = decompose(G, eta)
        J = j_matrix(G, eta)
        np.testing.assert_allclose(projections_interpolation(sd.b, -J @ J), sd.P, atol=1e-8)


def test_so4_split_examples():
    minus, plus = so4_split(I1)
    assert so4_norm(plus) == pytest.approx(0.5, abs=1e-15) and so4_norm(minus) == pytest.approx(0.5, abs=1e-15)
    minus, plus = so4_split(I1 + I2)
    assert not np.any(minus)
    np.testing.assert_array_equal(plus, I1 + I2)
    with pytest.raises(NotSkew):
        so4_split(np.eye(4))


def test_so4_split_duality(rng):
    for _ in range(20):
        a = rng.standard_normal((4, 4))
        mu = a - a.T
        minus, plus = so4_split(mu)
        np.testing.assert_allclose(minus + plus, mu, atol=1e-14)
        np.testing.assert_allclose(hodge_star(plus), plus, atol=1e-14)
        np.testing.assert_allclose(hodge_star(minus), -minus, atol=1e-14)
        assert abs(np.trace(plus.T @ minus)) <= 1e-12
        assert pfaffian(mu) == pytest.approx(so4_norm(plus) ** 2 - so4_norm(minus) ** 2, abs=1e-10)


def test_closed_form_diagonal():
    mu = 2 * I1 + 1 * I2
    sd = four_dim_closed_form(mu)
    np.testing.assert_allclose(sd.b, [2, 1], rtol=1e-14)
    np.testing.assert_allclose(sd.P[0], np.diag([1.0, 1, 0, 0]), atol=1e-14)
    np.testing.assert_allclose(sd.P[1], np.diag([0.0, 0, 1, 1]), atol=1e-14)


def test_closed_form_self_dual():
    mu = I1 + I2
    sd = four_dim_closed_form(mu)
    assert sd.done == 1 and sd.r == (2,)
    np.testing.assert_allclose(sd.b, [1.0])
    np.testing.assert_allclose(-mu @ mu, np.eye(4))
    with pytest.raises(ZeroMatrix):
        four_dim_closed_form(np.zeros((4, 4)))


def test_closed_form_agrees_with_decompose(rng):
    G = builtin_group("G37D")
    for eta in rng.standard_normal((50, 3)):
        a, b = four_dim_closed_form(j_matrix(G, eta)), decompose(G, eta)
        np.testing.assert_allclose(a.b, b.b, rtol=1e-9)
        np.testing.assert_allclose(a.P, b.P, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=6, max_size=6))
def test_closed_form_reconstructs(v):
    mu = np.zeros((4, 4))
    mu[np.triu_indices(4, 1)] = v
    mu = mu - mu.T
    if so4_norm(mu) < 1e-3:
        return
    sd = four_dim_closed_form(mu)
    recon = np.einsum("j,jik->ik", sd.b**2, sd.P)
    np.testing.assert_allclose(-mu @ mu, recon, atol=1e-9 * max(1.0, so4_norm(mu) ** 2))


def test_json_serialisable():
    json.dumps(decompose(builtin_group("N32"), [1, 2, 3]).to_json())
