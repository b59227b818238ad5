import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from graphene_moments import closure as C
from graphene_moments import grid as G
from graphene_moments.errors import (
    DomainError,
    ExpOverflow,
    NonPositiveDensity,
    NotDecoupled,
    PolarizationOverflow,
)
from graphene_moments.grid import PhaseSpaceGrid
from graphene_moments.oracle import matrix_exp_frechet, matrix_exp_pointwise
from graphene_moments.pauli import PauliSymbol, compose, decompose

EPS = 0.05


def test_gamma_constant():
    val = C.gamma_constant()
    assert abs(val - (np.log(2) - np.euler_gamma) / (4 * np.pi)) < 1e-10
    assert val == pytest.approx(0.009226, abs=1e-6)


def test_model_params():
    p = C.ModelParams(epsilon=0.1, gamma=2.0)
    assert p.gamma_hat == 2.0 * np.sqrt(np.pi / 2)
    assert p.c == pytest.approx(0.2)
    with pytest.raises(Exception):
        C.ModelParams(epsilon=-1.0)
    with pytest.raises(DomainError):
        C.ModelParams(epsilon=0.1, tau=0.0)


def test_from_physical_scalings():
    kw = dict(m=0.1 * 9.109e-31, v_F=1e6, T=300.0, tau_c=1e-13, r_hat=1e-7)
    d = C.ModelParams.from_physical(**kw)
    h = C.ModelParams.from_physical(scaling="hydrodynamic", **kw)
    p_hat = np.sqrt(kw["m"] * 1.380649e-23 * kw["T"])
    assert d.epsilon == pytest.approx(1.054571817e-34 / (kw["r_hat"] * p_hat))
    c = np.sqrt(kw["m"] * kw["v_F"] ** 2 / (1.380649e-23 * kw["T"]))
    assert d.gamma * d.epsilon == pytest.approx(c)
    assert d.tau == pytest.approx(h.tau)


# ---------------------------------------------------------------------------
# semigroup and leading exponential


def test_semigroup_limits(rng):
    x0 = rng.normal(size=4)
    a = np.array([0.3, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(C.semigroup_apply(a, 1.5, x0), np.exp(0.45) * x0)
    a = rng.normal(size=4)
    np.testing.assert_allclose(C.semigroup_apply(a, 0.0, x0), x0)


def test_semigroup_property(rng):
    for _ in range(20):
        a = rng.normal(size=4)
        x0 = rng.normal(size=4)
        b1, b2 = rng.uniform(0, 1.5, 2)
        lhs = C.semigroup_apply(a, b1, C.semigroup_apply(a, b2, x0))
        rhs = C.semigroup_apply(a, b1 + b2, x0)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-12)


def test_semigroup_matches_generator_expm(rng):
    a = rng.normal(size=4)
    x0 = rng.normal(size=4)
    gen = a[0] * np.eye(4)
    gen[0, 1:] = a[1:]
    gen[1:, 0] = a[1:]
    np.testing.assert_allclose(C.semigroup_apply(a, 1.3, x0), expm(1.3 * gen) @ x0, rtol=1e-12)


def test_leading_matches_matrix_exp(rng):
    c = rng.normal(size=(4, 50))
    c[:, 0] = [0.2, 0, 0, 0]
    a = PauliSymbol.from_components(c)
    got = C.gexp_leading(a, 0.8).components()
    expected = decompose(matrix_exp_pointwise(compose(0.8 * c[0], 0.8 * c[1:])))
    ref = decompose(np.array([expm(m) for m in compose(0.8 * c[0], 0.8 * c[1:])]))
    np.testing.assert_allclose(got, expected, rtol=1e-12)
    np.testing.assert_allclose(got, ref, rtol=1e-12)


def test_leading_gaussian_and_beta_zero(small_grid):
    a = PauliSymbol(np.broadcast_to(-0.5 * small_grid.p_abs ** 2, small_grid.shape), np.zeros((3,) + small_grid.shape))
    g = C.gexp_leading(a, 1.0)
    np.testing.assert_allclose(g.s0, np.exp(-0.5 * small_grid.p_abs ** 2) * np.ones(small_grid.shape))
    np.testing.assert_array_equal(g.svec, 0)
    g0 = C.gexp_leading(a, 0.0)
    np.testing.assert_array_equal(g0.s0, 1)


def test_leading_overflow():
    a = PauliSymbol(np.array([701.0]), np.zeros((3, 1)))
    with pytest.raises(ExpOverflow):
        C.gexp_leading(a, 1.0)


# ---------------------------------------------------------------------------
# first-order and SMS expansions


def _constant_symbol(c, grid):
    return PauliSymbol.from_components(np.broadcast_to(np.asarray(c)[(...,) + (None,) * 4], (4,) + grid.shape))


def test_first_order_vanishes_without_b(small_grid, rng):
    p1, p2 = small_grid.p_mesh()
    kp = 2 * np.pi / (2 * small_grid.p_max)
    comps = [np.broadcast_to(rng.normal() * np.cos(kp * p1 + rng.normal()) + 0.3 * np.sin(kp * p2), small_grid.shape)
             for _ in range(4)]
    a = PauliSymbol.from_components(comps)
    b = PauliSymbol.zeros(small_grid.shape)
    np.testing.assert_allclose(C.gexp_first_order(a, b, 1.0, small_grid).components(), 0, atol=1e-13)


def test_first_order_constant_symbols_frechet(small_grid, rng):
    for beta in (0.5, 1.0):
        ca = rng.normal(size=4)
        cb = rng.normal(size=4)
        a = _constant_symbol(ca, small_grid)
        b = _constant_symbol(cb, small_grid)
        got = C.gexp_first_order(a, b, beta, small_grid).components()[:, 0, 0, 0, 0]
        fre = matrix_exp_frechet(compose(beta * ca[0], beta * ca[1:]), compose(beta * cb[0], beta * cb[1:]))
        np.testing.assert_allclose(got, decompose(fre), atol=1e-8)


def test_sms_constant_symbols_match_matrix_exp(small_grid, rng):
    a0 = rng.normal()
    bv = rng.normal(size=3)
    a = _constant_symbol([a0, 0, 0, 0], small_grid)
    b = _constant_symbol([0, *bv], small_grid)
    beta, eps = 0.7, 1e-3
    got = C.gexp_sms(a, b, beta, eps, small_grid).components()[:, 0, 0, 0, 0]
    e = np.exp(beta * a0)
    np.testing.assert_allclose(got[1:], eps * beta * e * bv, rtol=1e-12)
    np.testing.assert_allclose(got[0], e * (1 + 0.5 * eps ** 2 * beta ** 2 * bv @ bv), rtol=1e-12)
    exact = decompose(expm(compose(beta * a0, beta * eps * bv)))
    np.testing.assert_allclose(got, exact, atol=1e-8)


def test_sms_without_b_is_scalar_expansion(small_grid, rng):
    from graphene_moments.verification import random_periodic_symbol

    a0 = random_periodic_symbol(small_grid, rng)
    g = C.gexp_sms(a0, np.zeros((3,) + small_grid.shape), 1.0, 0.1, small_grid)
    np.testing.assert_allclose(g.s0, np.exp(a0) + 0.01 * C.scalar_exp2(a0, 1.0, small_grid))
    np.testing.assert_array_equal(g.svec, 0)


def test_sms_not_decoupled(small_grid):
    a = PauliSymbol(np.zeros(small_grid.shape), np.ones((3,) + small_grid.shape))
    b = PauliSymbol.zeros(small_grid.shape)
    with pytest.raises(NotDecoupled):
        C.gexp_sms(a, b, 1.0, 0.1, small_grid)
    a = PauliSymbol.zeros(small_grid.shape)
    b = PauliSymbol(np.ones(small_grid.shape), np.zeros((3,) + small_grid.shape))
    with pytest.raises(NotDecoupled):
        C.gexp_sms(a, b, 1.0, 0.1, small_grid)


def test_exp2_quadratic_matches_spectral_for_periodic_part(moment_grid):
    # for a = -(|p|^2/2 + A) the analytic and the finite-difference second-order term agree
    x1, x2 = moment_grid.position.mesh()
    A = 0.3 * np.cos(x1) + 0.1 * np.sin(x2)
    got = C.exp2_quadratic(A, 1.0, moment_grid)
    gA = G.gradient_r(A, moment_grid.position)
    h11, h12, h22 = G.hessian_r(A, moment_grid.position)
    p1, p2 = moment_grid.p_mesh()
    F = moment_grid.full
    a = -(0.5 * moment_grid.p_abs ** 2 + F(A))
    d1 = 2 * (F(h11) + F(h22))
    d2 = -(F(h11) * p1 * p1 + 2 * F(h12) * p1 * p2 + F(h22) * p2 * p2) - (F(gA[0]) ** 2 + F(gA[1]) ** 2)
    expected = -0.125 * np.exp(a) * (d1 / 2 + d2 / 3)
    np.testing.assert_allclose(got, expected, atol=1e-13)


# ---------------------------------------------------------------------------
# scalar Maxwellian and equilibria


def test_scalar_maxwellian(moment_grid):
    n_const = np.full((16, 16), 2.0)
    g = C.scalar_quantum_maxwellian(n_const, EPS, moment_grid)
    np.testing.assert_allclose(g, 2.0 * np.exp(-0.5 * moment_grid.p_abs ** 2) / (2 * np.pi) * np.ones(moment_grid.shape))
    x1, _ = moment_grid.position.mesh()
    n = 1 + 0.5 * np.sin(x1)
    g = C.scalar_quantum_maxwellian(n, EPS, moment_grid)
    np.testing.assert_allclose(G.integrate_p(g, moment_grid), n, atol=1e-8)
    p1, p2 = moment_grid.p_mesh()
    g0 = C.scalar_quantum_maxwellian(n, 0.0, moment_grid)
    np.testing.assert_allclose(G.integrate_p(p1 * p1 * g0, moment_grid), n, atol=1e-9)
    np.testing.assert_allclose(G.integrate_p(p1 * p2 * g0, moment_grid), 0, atol=1e-12)
    with pytest.raises(NonPositiveDensity):
        C.scalar_quantum_maxwellian(n - 2, EPS, moment_grid)


@pytest.fixture(scope="module")
def dens(moment_grid):
    x1, x2 = moment_grid.position.mesh()
    return x1, x2, 1 + 0.3 * np.sin(x1) + 0.2 * np.cos(x2)


def test_qde1_unpolarized(moment_grid, dens):
    _, _, n0 = dens
    p = C.ModelParams(epsilon=EPS)
    g = C.equilibrium_qde1(n0, np.zeros_like(n0), p, moment_grid).g
    gauss = np.exp(-0.5 * moment_grid.p_abs ** 2) / (2 * np.pi)
    np.testing.assert_allclose(g.s0, moment_grid.full(n0) * gauss)
    np.testing.assert_array_equal(g.svec[2], 0)
    c = C.gaussian_constants(moment_grid).c
    u1 = moment_grid.p_mesh()[0] / moment_grid.p_abs
    np.testing.assert_allclose(g.svec[0], EPS * (c - moment_grid.p_abs) * moment_grid.full(n0) * gauss * u1, atol=1e-15)


def test_qde1_constraints_and_parity(moment_grid, dens):
    x1, x2, n0 = dens
    ns = 0.3 * np.cos(x1 + x2) * n0
    eq = C.equilibrium_qde1(n0, ns, C.ModelParams(epsilon=EPS), moment_grid)
    assert eq.order == 1 and eq.model_tag == "qde1"
    m0, ms = C.band_moments(eq.g, moment_grid)
    np.testing.assert_allclose(m0 + ms, n0 + ns, atol=1e-8)
    np.testing.assert_allclose(m0 - ms, n0 - ns, atol=1e-8)
    flip = lambda f: f[..., ::-1, ::-1]
    np.testing.assert_allclose(eq.g.s0, flip(eq.g.s0), rtol=0, atol=1e-15)
    np.testing.assert_allclose(eq.g.svec, -flip(eq.g.svec), rtol=0, atol=1e-15)
    assert np.all(eq.g.s0 > 0)


def test_qde1_polarization_overflow(moment_grid, dens):
    _, _, n0 = dens
    with pytest.raises(PolarizationOverflow):
        C.equilibrium_qde1(n0, n0.copy(), C.ModelParams(epsilon=EPS), moment_grid)


def test_continuum_constant_makes_p_weight_mean_free():
    # sqrt(pi/2) is the Gaussian mean of |p| in 2D
    from scipy.integrate import quad

    mean, _ = quad(lambda r: r * r * np.exp(-0.5 * r * r), 0, np.inf)
    assert mean == pytest.approx(np.sqrt(np.pi / 2), rel=1e-12)


def test_qde2(moment_grid, dens):
    x1, _, n0 = dens
    p = C.ModelParams(epsilon=EPS)
    g = C.equilibrium_qde2(n0, np.zeros_like(n0), p, moment_grid).g
    c = C.gaussian_constants(moment_grid).c
    gauss = np.exp(-0.5 * moment_grid.p_abs ** 2) / (2 * np.pi)
    u1 = moment_grid.p_mesh()[0] / moment_grid.p_abs
    expected = EPS * moment_grid.full(n0) * gauss * (c - moment_grid.p_abs) * u1
    np.testing.assert_allclose(g.svec[0], expected, atol=1e-15)
    ns = 0.5 * EPS * np.cos(x1) * n0
    g = C.equilibrium_qde2(n0, ns, p, moment_grid).g
    m0, ms = C.band_moments(g, moment_grid)
    np.testing.assert_allclose(m0, n0, atol=1e-7)
    np.testing.assert_allclose(ms, ns, atol=1e-7)
    assert np.all(g.s0 > 0)
    with pytest.warns(UserWarning):
        C.equilibrium_qde2(n0, 0.9 * n0, p, moment_grid)


def test_qde2_minus_qde1_is_second_order(moment_grid, dens):
    x1, _, n0 = dens
    eps_list = [0.1, 0.05, 0.025, 0.0125]
    diffs = []
    for e in eps_list:
        p = C.ModelParams(epsilon=e)
        ns = 0.5 * e * np.cos(x1) * n0
        a = C.equilibrium_qde1(n0, ns, p, moment_grid).g
        b = C.equilibrium_qde2(n0, ns, p, moment_grid).g
        diffs.append((a - b).sup_norm())
    assert np.polyfit(np.log(eps_list), np.log(diffs), 1)[0] >= 1.8


def test_multipliers(moment_grid, dens):
    x1, _, n0 = dens
    p = C.ModelParams(epsilon=EPS)
    ns = 0.5 * EPS * np.cos(x1) * n0
    A, B, info = C.solve_multipliers_diffusive(n0 + ns, n0 - ns, p, moment_grid)
    assert info["residual"] < 1e-10
    g = C.equilibrium_from_multipliers(A, B, p, moment_grid)
    m0, ms = C.band_moments(g, moment_grid)
    np.testing.assert_allclose(m0 + ms, n0 + ns, atol=1e-9)
    np.testing.assert_allclose(m0 - ms, n0 - ns, atol=1e-9)


def test_multipliers_unpolarized_small_eps(moment_grid, dens):
    _, _, n0 = dens
    p = C.ModelParams(epsilon=1e-4, constants="continuum")
    A, B, _ = C.solve_multipliers_diffusive(n0, n0, p, moment_grid)
    np.testing.assert_allclose(A, -np.log(n0 / (2 * np.pi)), atol=1e-6)
    np.testing.assert_allclose(B, -np.sqrt(np.pi / 2), atol=1e-6)


def test_qhe1_limits_and_constraints(moment_grid, dens):
    x1, x2, n0 = dens
    p = C.ModelParams(epsilon=EPS)
    zero3 = np.zeros((3,) + n0.shape)
    zero2 = np.zeros((2,) + n0.shape)
    g = C.equilibrium_qhe1(n0, zero3, zero2, p, moment_grid).g
    gauss = moment_grid.full(n0) * np.exp(-0.5 * moment_grid.p_abs ** 2) / (2 * np.pi)
    p1, p2 = moment_grid.p_mesh()
    np.testing.assert_allclose(g.svec[0], -EPS * gauss * p1, atol=1e-15)
    np.testing.assert_allclose(g.svec[1], -EPS * gauss * p2, atol=1e-15)
    nv = np.stack([0.2 * n0 * np.cos(x2), 0.1 * n0 * np.sin(x1), 0.1 * n0])
    J = np.stack([0.3 * np.sin(x2), 0.2 * np.cos(x1)])
    g = C.equilibrium_qhe1(n0, nv, J, p, moment_grid).g
    a, b, c = C.hydro_moments(g, moment_grid)
    np.testing.assert_allclose(a, n0, atol=1e-7)
    np.testing.assert_allclose(b, nv, atol=1e-7)
    np.testing.assert_allclose(c, J, atol=1e-7)


def test_qhe1_galilean_shift(moment_grid, dens):
    _, _, n0 = dens
    p = C.ModelParams(epsilon=EPS)
    zero3 = np.zeros((3,) + n0.shape)
    v = 2 * moment_grid.dp
    J0 = np.zeros((2,) + n0.shape)
    J1 = np.stack([n0 * v, np.zeros_like(n0)])
    g0 = C.equilibrium_qhe1(n0, zero3, J0, p, moment_grid).g.s0
    g1 = C.equilibrium_qhe1(n0, zero3, J1, p, moment_grid).g.s0
    # shift by two grid cells along p1
    np.testing.assert_allclose(g1[:, :, 2:, :], g0[:, :, :-2, :], atol=1e-15)


def test_qhe2(moment_grid, dens):
    x1, x2, n0 = dens
    p = C.ModelParams(epsilon=EPS)
    nv = 3 * EPS * np.stack([0.2 * n0 * np.cos(x2), 0.1 * n0 * np.sin(x1), 0.1 * n0])
    J = np.stack([0.3 * np.sin(x2), 0.2 * np.cos(x1)])
    g = C.equilibrium_qhe2(n0, nv, J, p, moment_grid).g
    a, b, c = C.hydro_moments(g, moment_grid)
    np.testing.assert_allclose(a, n0, atol=1e-7)
    np.testing.assert_allclose(b, nv, atol=1e-9)
    np.testing.assert_allclose(c, J, atol=1e-7)
    zero3 = np.zeros((3,) + n0.shape)
    g = C.equilibrium_qhe2(n0, zero3, J, p, moment_grid).g
    p1, _ = moment_grid.p_mesh()
    u1 = moment_grid.full(J[0] / n0)
    G0 = moment_grid.full(n0) / (2 * np.pi) * np.exp(-0.5 * ((p1 - u1) ** 2 + (moment_grid.p_mesh()[1] - moment_grid.full(J[1] / n0)) ** 2))
    np.testing.assert_allclose(g.svec[0], -EPS * G0 * (p1 - u1), atol=1e-15)
    assert np.all(g.s0 > 0)


def test_omega():
    assert C.omega_regularized(1.0, 0.5) == pytest.approx(1 / np.log(np.sqrt(3)), rel=1e-14)
    assert C.omega_regularized(1.0, 0.5) == pytest.approx(1.8205, abs=1e-4)
    assert C.omega_times_x(1e-9) == pytest.approx(1.0)
    xs = 1e-3
    series = C.omega_times_x(np.array(xs), x_switch=xs)
    direct = xs / np.arctanh(xs)
    assert abs(series - direct) < 1e-10
    with pytest.raises(DomainError):
        C.omega_regularized(1.0, 1.0)


def test_spin_frame_small_x_branch():
    pg = G.PositionGrid(8)
    n0 = np.ones(pg.shape)
    for x in (0.9e-2, 1.1e-2):
        nv = np.stack([x * n0, 0 * n0, 0 * n0])
        t = C.spin_frame_terms(n0, nv, pg, 1.0)
        direct = (1 - x * x - x / np.arctanh(x)) / (x * x)
        np.testing.assert_allclose(t["cx"], direct, rtol=1e-9)
