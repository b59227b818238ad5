import numpy as np
import pytest

from graphene_moments import grid as G
from graphene_moments.grid import PhaseSpaceGrid, PositionGrid, SpectralJet


def band_limited(pg, rng, modes=4):
    x1, x2 = pg.mesh()
    f = np.zeros(pg.shape)
    for _ in range(modes):
        m = rng.integers(-4, 5, 2)
        f += rng.normal() * np.cos(m[0] * x1 + m[1] * x2 + rng.uniform(0, 2 * np.pi))
    return f


def test_grid_validation():
    with pytest.raises(ValueError):
        PositionGrid(12)
    with pytest.raises(ValueError):
        PhaseSpaceGrid(8, 16, p_max=5.0)


def test_momentum_grid_symmetric_without_origin():
    g = PhaseSpaceGrid(4, 16)
    np.testing.assert_allclose(g.p, -g.p[::-1], atol=1e-15)
    assert np.all(g.p != 0)


def test_gradient_constant(pos32):
    np.testing.assert_allclose(G.gradient_r(np.full(pos32.shape, 2.0), pos32), 0, atol=1e-14)


def test_laplacian_eigenfunction():
    pg = PositionGrid(32, 3.0)
    x1, _ = pg.mesh()
    k = 2 * np.pi / pg.length
    f = np.sin(k * x1)
    np.testing.assert_allclose(G.laplacian_r(f, pg), -(k ** 2) * f, atol=1e-10)


def test_div_grad_is_laplacian(pos32, rng):
    f = band_limited(pos32, rng)
    np.testing.assert_allclose(G.divergence_r(G.gradient_r(f, pos32), pos32), G.laplacian_r(f, pos32), atol=1e-12)


def test_hessian_trace(pos32, rng):
    f = band_limited(pos32, rng)
    f11, _, f22 = G.hessian_r(f, pos32)
    np.testing.assert_allclose(f11 + f22, G.laplacian_r(f, pos32), atol=1e-11)


def test_spectral_jet_mode():
    g = PhaseSpaceGrid(8, 16, 2 * np.pi, 8.0)
    r1, r2 = g.r_mesh()
    p1, p2 = g.p_mesh()
    kp = 2 * np.pi / (2 * g.p_max)
    f = np.broadcast_to(np.sin(2 * r1 + r2) * np.cos(3 * kp * p2), g.shape)
    jet = SpectralJet(f, g)
    expected = np.broadcast_to(np.cos(2 * r1 + r2) * -3 * kp * np.sin(3 * kp * p2), g.shape)
    np.testing.assert_allclose(jet.d(0, 3), 2 * expected, rtol=0, atol=1e-10)


def test_gradient_components(pos32, rng):
    v = np.stack([band_limited(pos32, rng) for _ in range(3)])
    d = G.gradient_components(v, pos32)
    assert d.shape == (2, 3) + pos32.shape
    np.testing.assert_allclose(d[1, 2], G.gradient_r(v[2], pos32)[1])


def test_threads():
    prev = G.get_threads()
    G.set_threads(2)
    assert G.get_threads() == 2
    with pytest.raises(ValueError):
        G.set_threads(0)
    G.set_threads(prev)


def test_integrals():
    g = PhaseSpaceGrid(4, 64, 2 * np.pi, 8.0)
    gauss = np.exp(-0.5 * g.p_abs ** 2) / (2 * np.pi)
    np.testing.assert_allclose(G.integrate_p(gauss, g), 1.0, atol=1e-12)
    pg = PositionGrid(16, 2.0)
    assert G.integrate_r(np.ones(pg.shape), pg) == pytest.approx(4.0)
