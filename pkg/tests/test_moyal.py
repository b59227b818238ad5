import numpy as np
import pytest

from graphene_moments import grid as G
from graphene_moments.errors import GridMismatch, NonPositiveEpsilon, UnsupportedOrder
from graphene_moments.grid import PhaseSpaceGrid
from graphene_moments.moyal import ThetaOperator, moyal_term, poisson_bracket, theta_epsilon
from graphene_moments.verification import random_periodic_symbol


@pytest.fixture(scope="module")
def grid():
    return PhaseSpaceGrid(16, 32, 2 * np.pi, 8.0)


def fields(grid):
    r1, r2 = grid.r_mesh()
    p1, p2 = grid.p_mesh()
    kp = 2 * np.pi / (2 * grid.p_max)
    full = lambda f: np.broadcast_to(f, grid.shape).copy()
    return full(r1), full(r2), full(p1), full(p2), kp


def test_order0_ones(grid):
    one = np.ones(grid.shape)
    np.testing.assert_array_equal(moyal_term(0, one, one, grid), 1)


def test_order1_canonical_pair(grid):
    # periodic version of (r1, p1): single nonzero derivative pair
    r1, _, p1, _, kp = fields(grid)
    got = moyal_term(1, np.sin(r1), np.sin(kp * p1), grid)
    np.testing.assert_allclose(got, 0.5 * np.cos(r1) * kp * np.cos(kp * p1), atol=1e-12)


def test_order2_single_term(grid):
    r1, _, p1, _, kp = fields(grid)
    got = moyal_term(2, np.cos(r1), np.cos(kp * p1), grid)
    # only d_r1r1 f * d_p1p1 g survives
    np.testing.assert_allclose(got, -0.125 * np.cos(r1) * kp ** 2 * np.cos(kp * p1), atol=1e-12)


def test_symmetry(grid, rng):
    f = random_periodic_symbol(grid, rng)
    g = random_periodic_symbol(grid, rng)
    np.testing.assert_allclose(moyal_term(1, f, g, grid), -moyal_term(1, g, f, grid), atol=1e-13)
    np.testing.assert_allclose(moyal_term(2, f, g, grid), moyal_term(2, g, f, grid), atol=1e-13)


def test_poisson(grid, rng):
    f = random_periodic_symbol(grid, rng)
    g = random_periodic_symbol(grid, rng)
    np.testing.assert_allclose(poisson_bracket(f, f, grid), 0, atol=1e-13)
    np.testing.assert_allclose(moyal_term(1, f, g, grid), 0.5 * poisson_bracket(f, g, grid), atol=1e-14)
    r1, _, p1, _, kp = fields(grid)
    # {sin r1, sin(kp p1)} -> kp at r1 = p1 = 0
    pb = poisson_bracket(np.sin(r1), np.sin(kp * p1) / kp, grid)
    np.testing.assert_allclose(pb, np.cos(r1) * np.cos(kp * p1), atol=1e-12)


def test_errors(grid):
    one = np.ones(grid.shape)
    with pytest.raises(UnsupportedOrder):
        moyal_term(3, one, one, grid)
    with pytest.raises(GridMismatch):
        moyal_term(1, one, np.ones((2, 2, 2, 2)), grid)
    with pytest.raises(GridMismatch):
        poisson_bracket(one, np.ones((2, 2, 2, 2)), grid)


def test_theta_constant_potential(grid, rng):
    w = random_periodic_symbol(grid, rng)
    V = np.full((grid.n_r, grid.n_r), 3.0)
    np.testing.assert_array_equal(theta_epsilon(V, w, 0.1, grid), 0)


def test_theta_single_mode_closed_form(grid):
    r1, _, p1, _, kp = fields(grid)
    k = 3 * kp
    x = grid.r
    V = np.sin(x)[:, None] * np.ones(grid.n_r)[None, :]
    w = np.cos(k * p1)
    for eps in (0.05, 0.4, 1.0):
        expected = 2 * np.cos(r1) / eps * np.sin(0.5 * eps * k) * np.sin(k * p1)
        np.testing.assert_allclose(theta_epsilon(V, w, eps, grid), expected, atol=1e-12)


def test_theta_classical_limit(grid, rng):
    w = random_periodic_symbol(grid, rng)
    x1, x2 = grid.position.mesh()
    V = 0.3 * np.cos(x1) + 0.2 * np.sin(2 * x2)
    gV = G.gradient_r(V, grid.position)
    jet = G.SpectralJet(w, grid)
    limit = -(grid.full(gV[0]) * jet.d(2) + grid.full(gV[1]) * jet.d(3))
    eps = np.array([0.2, 0.1, 0.05, 0.025])
    err = [np.abs(theta_epsilon(V, w, e, grid) - limit).max() for e in eps]
    slope = np.polyfit(np.log(eps), np.log(err), 1)[0]
    assert slope > 1.9


def test_theta_integral_vanishes(grid, rng):
    w = np.exp(-0.5 * grid.p_abs ** 2) * (1 + 0.3 * np.cos(fields(grid)[0]))
    x1, x2 = grid.position.mesh()
    V = 0.3 * np.cos(x1) + 0.2 * np.sin(x2)
    out = ThetaOperator(V, 0.1, grid)(w)
    total = G.integrate_r(G.integrate_p(out, grid), grid)
    assert abs(total) < 1e-9


def test_theta_real_and_nonpositive_eps(grid):
    V = np.zeros((grid.n_r, grid.n_r))
    with pytest.raises(NonPositiveEpsilon):
        ThetaOperator(V, 0.0, grid)
    with pytest.raises(GridMismatch):
        ThetaOperator(np.zeros((3, 3)), 0.1, grid)
