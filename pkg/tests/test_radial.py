import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphmean.jets import jet_apply_elementary, jet_variable
from sphmean.radial import (
    OperatorSpec,
    apply_operator,
    horospherical_oracle,
    kappa,
    lemma_matrices,
    ode_residual,
    radial_jet,
    solve_radial,
    u_jet,
    verify_identity,
)

POINTS = np.linspace(0.06, 3.0, 10)


def test_m0_normalization():
    sol = solve_radial("H", 2, 0, 1.5, 2.0)
    assert sol.values[0] == 1.0
    assert sol.derivs[0] == 0.0


def test_n3_closed_form():
    lam = 2.0
    sol = solve_radial("H", 3, 0, lam, 2.0)
    r = sol.grid[1:]
    ref = np.sin(lam * r) / (lam * np.sinh(r))
    assert np.max(np.abs(sol.values[1:] - ref)) <= 1e-8


def test_sphere_legendre_profiles():
    sol0 = solve_radial("S", 2, 0, 1.0, 3.0)
    assert np.max(np.abs(sol0.values - np.cos(sol0.grid))) <= 1e-10
    sol1 = solve_radial("S", 2, 1, 1.0, 3.0)
    assert np.max(np.abs(sol1.values - np.sin(sol1.grid))) <= 1e-10


def test_frobenius_leading_coefficient():
    sol = solve_radial("H", 2, 3, 1.0, 1.0)
    r = sol.grid[1:40]
    np.testing.assert_allclose(sol.values[1:40] / r**3, 1.0, rtol=1e-2)
    assert sol.values[1] / sol.grid[1] ** 3 == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("geometry", ["H", "S"])
@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_ode_residual(geometry, n, m):
    # on S the profiles with lam < m grow toward r = pi, where the check's
    # fourth-order h'' needs the finer grid
    N = 2001 if geometry == "H" else 4001
    for lam in (0.5, 1.0, 2.0, 5.0):
        sol = solve_radial(geometry, n, m, lam, 2.5, N=N)
        assert np.max(ode_residual(sol)) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.1, 8.0), m=st.integers(0, 4))
def test_even_in_lambda(lam, m):
    a = solve_radial("H", 2, m, lam, 2.0, N=257)
    b = solve_radial("H", 2, m, -lam, 2.0, N=257)
    assert np.max(np.abs(a.values - b.values)) <= 1e-12 * max(1.0, np.max(np.abs(a.values)))


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.1, 8.0), m=st.integers(0, 4))
def test_sphere_symmetric_about_minus_half(lam, m):
    # the sphere energy lam (lam + 1) is invariant under lam -> -1 - lam
    a = solve_radial("S", 2, m, lam, 2.0, N=257)
    b = solve_radial("S", 2, m, -1.0 - lam, 2.0, N=257)
    assert np.max(np.abs(a.values - b.values)) <= 1e-12 * max(1.0, np.max(np.abs(a.values)))


def test_radial_validation():
    with pytest.raises(ValueError):
        solve_radial("S", 2, 0, 1.0, math.pi)
    with pytest.raises(ValueError):
        solve_radial("H", 2, 0, 1.0, 1.0, N=32)
    with pytest.raises(ValueError):
        solve_radial("H", 2, -1, 1.0, 1.0)


def test_horospherical_oracle_examples():
    assert horospherical_oracle(2, 1.0, 0.0) == pytest.approx(1.0, abs=1e-15)
    sol = solve_radial("H", 2, 0, 1.0, 1.0)
    assert horospherical_oracle(2, 1.0, 1.0) == pytest.approx(sol.values[-1], abs=1e-6)
    assert horospherical_oracle(2, 1.3, 0.8) == pytest.approx(horospherical_oracle(2, -1.3, 0.8), abs=1e-10)
    with pytest.raises(ValueError):
        horospherical_oracle(4, 1.0, 1.0)


@pytest.mark.parametrize("n", [2, 3])
def test_horospherical_cross_oracle(n):
    r = np.linspace(0.0, 2.0, 9)
    for lam in (0.5, 1.0, 2.0, 5.0):
        sol = solve_radial("H", n, 0, lam, 2.0)
        for ri in r:
            assert abs(horospherical_oracle(n, lam, ri) - float(sol(ri))) <= 1e-6


def test_gamma1_of_coth_is_one():
    c = jet_apply_elementary("coth", jet_variable(0.8, 3))
    g = apply_operator(OperatorSpec("Gamma", 2, k=1), c)
    np.testing.assert_allclose(g.coeffs, [1.0, 0.0, 0.0], atol=1e-14)


def test_apply_gamma_to_constant():
    f = jet_variable(0.8, 3) * 0.0 + 1.0
    g = apply_operator(OperatorSpec("Gamma", 2, k=1), f)
    assert g.coeffs[0] == pytest.approx(1.0 / math.tanh(0.8), rel=1e-15)


def test_D0_reproduces_eigenvalue():
    sol = solve_radial("H", 2, 0, 1.5, 2.0)
    i = 700
    h = radial_jet(sol, i, 6)
    Dh = apply_operator(OperatorSpec("B_r", 2), h)
    assert abs(Dh.coeffs[0] + sol.energy * h.coeffs[0]) <= 1e-8


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_Q_annihilates_u(m):
    for i in range(m):
        u = u_jet(i, m, 2, 0.7, m + 2)
        q = apply_operator(OperatorSpec("Q", 2, m=m), u)
        assert abs(q.coeffs[0]) <= 1e-9 * max(1.0, np.max(np.abs(u.coeffs)))


def test_operator_order_and_domain():
    with pytest.raises(ValueError):
        apply_operator(OperatorSpec("D", 2, m=1), jet_variable(0.5, 1))
    with pytest.raises(ValueError):
        apply_operator(OperatorSpec("D", 2, m=1), jet_variable(0.0, 4))
    with pytest.raises(ValueError):
        OperatorSpec("Gamma", 2, k=0)
    with pytest.raises(ValueError):
        OperatorSpec("curl")


def test_poly_in_D_matches_repeated_application():
    f = jet_apply_elementary("exp", jet_variable(0.9, 8))
    D = OperatorSpec("D", 3, m=2)
    direct = 2.0 * f + (-1.0) * apply_operator(D, f) + 0.5 * apply_operator(D, apply_operator(D, f))
    poly = apply_operator(OperatorSpec("poly_in_D", 3, m=2, coeffs=(2.0, -1.0, 0.5)), f)
    assert poly.coeffs[0] == pytest.approx(direct.coeffs[0], rel=1e-14)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_kappa_decreasing_and_u_positive(n):
    for m in range(1, 9):
        ks = [kappa(m, n, i) for i in range(m)]
        assert all(a > b for a, b in zip(ks, ks[1:]))
        for i in range(m):
            assert u_jet(i, m, n, 1.0, 0).coeffs[0] > 0


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_identities_hold(n):
    for k in (1, 4, 8):
        assert verify_identity("commutation", n, POINTS, k=k).passed
    for m in (1, 3, 8):
        for i in range(m):
            assert verify_identity("prop_Dm", n, POINTS, m=m, i=i).passed
            assert verify_identity("prop_Qm", n, POINTS, m=m, i=i).passed


def test_identity_report_shape():
    rep = verify_identity("gamma_ladder", 2, POINTS, k=3, i=2).to_dict()
    assert set(rep) == {"identity", "params", "max_residual", "tolerance", "pass"}
    assert rep["pass"] and rep["params"] == {"n": 2, "k": 3, "i": 2}
    with pytest.raises(ValueError):
        verify_identity("prop_Dm", 2, POINTS, m=2, i=2)
    with pytest.raises(ValueError):
        verify_identity("nonsense", 2, POINTS)


def test_identity_detects_wrong_kappa():
    # a perturbed identity must fail: D_m u_i differs from (kappa_i + 1) u_i
    u = u_jet(0, 3, 2, 0.9, 4)
    Du = apply_operator(OperatorSpec("D", 2, m=3), u)
    assert abs(Du.coeffs[0] - (kappa(3, 2, 0) + 1) * u.coeffs[0]) > 1e-3


def test_lemma_structure():
    L = lemma_matrices(3, 2, 1.0)
    for l in range(3):
        assert L.A[l, 3 + l] == pytest.approx(1.0, abs=1e-12)
        assert np.all(L.A[l, 4 + l :] == 0.0)
    np.testing.assert_array_equal(L.B[0], np.eye(6)[0])
    assert L.stacked_rank == 6
    assert L.equilibrated_rank == 6


def test_lemma_validation():
    with pytest.raises(ValueError):
        lemma_matrices(0, 2, 1.0)
    with pytest.raises(ValueError):
        lemma_matrices(2, 2, -1.0)
