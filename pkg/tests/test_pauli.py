import numpy as np
import pytest

from graphene_moments.errors import NonHermitian, UnsupportedOrder
from graphene_moments.pauli import SIGMA, PauliSymbol, compose, decompose, dot, sym_moyal_pauli, wedge
from graphene_moments.verification import random_periodic_symbol


def random_hermitian(rng, n):
    c = rng.normal(size=(4, n))
    return compose(c[0], c[1:]), c


def test_decompose_basis():
    np.testing.assert_array_equal(decompose(np.eye(2)), [1, 0, 0, 0])
    np.testing.assert_array_equal(decompose(SIGMA[3]), [0, 0, 0, 1])
    np.testing.assert_allclose(decompose(np.array([[2, 1], [1, 0]])), [1, 1, 0, 1])


def test_compose_basis():
    np.testing.assert_array_equal(compose(1.0, [0, 0, 0]), np.eye(2))
    np.testing.assert_array_equal(compose(0.0, [0, 1, 0]), SIGMA[2])


def test_round_trip(rng):
    m, c = random_hermitian(rng, 100)
    np.testing.assert_allclose(decompose(m), c, atol=1e-15)
    np.testing.assert_allclose(compose(*np.split(decompose(m), [1])[0], decompose(m)[1:]), m, atol=1e-15)


def test_non_hermitian_rejected():
    with pytest.raises(NonHermitian):
        decompose(np.array([[1, 1], [0, 1]]))


def test_wedge_examples():
    e1, e2, e3 = np.eye(3)
    np.testing.assert_array_equal(wedge(e1, e2), e3)
    a = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(wedge(a, a), 0)
    np.testing.assert_array_equal(wedge(a, [4, 5, 6]), [-3, 6, -3])


def test_symbol_shapes():
    with pytest.raises(ValueError):
        PauliSymbol(np.zeros((2, 2)), np.zeros((3, 2, 3)))
    s = PauliSymbol.identity((2, 2))
    assert s.components().shape == (4, 2, 2)
    np.testing.assert_array_equal(s.matrix()[0, 0], np.eye(2))


def test_order0_constant():
    one = PauliSymbol.identity((2, 2, 2, 2))
    r = sym_moyal_pauli(0, one, one)
    np.testing.assert_array_equal(r.s0, 1)
    np.testing.assert_array_equal(r.svec, 0)


def test_order0_commutative_bilinear(rng):
    shape = (3, 3)
    a, b, c = (PauliSymbol.from_components(rng.normal(size=(4,) + shape)) for _ in range(3))
    ab = sym_moyal_pauli(0, a, b)
    ba = sym_moyal_pauli(0, b, a)
    np.testing.assert_allclose(ab.components(), ba.components())
    lhs = sym_moyal_pauli(0, a + 2.0 * c, b)
    rhs = sym_moyal_pauli(0, a, b) + 2.0 * sym_moyal_pauli(0, c, b)
    np.testing.assert_allclose(lhs.components(), rhs.components(), atol=1e-13)


def test_order0_matches_anticommutator(rng):
    shape = (5,)
    a, b = (PauliSymbol.from_components(rng.normal(size=(4,) + shape)) for _ in range(2))
    ma, mb = a.matrix(), b.matrix()
    expected = decompose(0.5 * (ma @ mb + mb @ ma))
    np.testing.assert_allclose(sym_moyal_pauli(0, a, b).components(), expected, atol=1e-13)


def _random_symbol(grid, rng):
    return PauliSymbol.from_components([random_periodic_symbol(grid, rng) for _ in range(4)])


def _matrix_moyal(k, a, b, grid):
    """Entrywise matrix evaluation of (a #k b + b #k a)/2 from scalar Moyal terms."""
    from graphene_moments.moyal import moyal_term

    ma, mb = a.matrix(), b.matrix()
    out = np.zeros(ma.shape, dtype=complex)
    # f #k g for matrix entries: sum over the inner index
    unit = 1j if k == 1 else 1.0
    for i in range(2):
        for j in range(2):
            for l in range(2):
                for (x, y) in ((ma, mb), (mb, ma)):
                    fr, fi = x[..., i, l].real, x[..., i, l].imag
                    gr, gi = y[..., l, j].real, y[..., l, j].imag
                    t = (moyal_term(k, fr, gr, grid) - moyal_term(k, fi, gi, grid)
                         + 1j * (moyal_term(k, fr, gi, grid) + moyal_term(k, fi, gr, grid)))
                    out[..., i, j] += 0.5 * unit * t
    return out


@pytest.mark.parametrize("k", [1, 2])
def test_matches_matrix_form(k, small_grid, rng):
    a = _random_symbol(small_grid, rng)
    b = _random_symbol(small_grid, rng)
    got = sym_moyal_pauli(k, a, b, small_grid)
    mat = _matrix_moyal(k, a, b, small_grid)
    # for k = 1 the kernel carries i, so the symmetrized matrix is hermitian with real components
    expected = decompose(mat)
    scale = max(1.0, np.abs(expected).max())
    np.testing.assert_allclose(got.components(), expected, atol=1e-10 * scale)


def test_order1_equal_args_and_zero_scalar(small_grid, rng):
    a = _random_symbol(small_grid, rng)
    b = _random_symbol(small_grid, rng)
    # a ^# a is not zero in general; the scalar part always is
    np.testing.assert_array_equal(sym_moyal_pauli(1, a, b, small_grid).s0, 0)
    np.testing.assert_array_equal(sym_moyal_pauli(1, a, a, small_grid).s0, 0)


def test_order1_equal_scalar_symbols_vanish(small_grid, rng):
    f = random_periodic_symbol(small_grid, rng)
    a = PauliSymbol(f, np.stack([f, f, f]))
    np.testing.assert_allclose(sym_moyal_pauli(1, a, a, small_grid).components(), 0, atol=1e-12)


def test_unsupported_order():
    a = PauliSymbol.identity((2, 2))
    with pytest.raises(UnsupportedOrder):
        sym_moyal_pauli(3, a, a)


def test_dot():
    assert dot([1, 2, 3], [4, 5, 6]) == 32
