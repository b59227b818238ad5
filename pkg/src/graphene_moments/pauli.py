"""Pauli components of hermitian 2x2 symbols.

A hermitian matrix ``M`` is written ``M = a0 s0 + a1 s1 + a2 s2 + a3 s3``
with real ``a_s = tr(M s_s) / 2``.  Symbols are stored component-wise;
the 2x2 matrix form only exists for round-trips and oracle comparisons.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NonHermitian, UnsupportedOrder

SIGMA = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


@dataclass
class PauliSymbol:
    """Hermitian-matrix-valued field stored as four real component fields.

    ``s0`` has the grid shape, ``svec`` has shape ``(3,) + s0.shape``.
    """

    s0: np.ndarray
    svec: np.ndarray

    def __post_init__(self):
        self.s0 = np.asarray(self.s0, dtype=float)
        self.svec = np.asarray(self.svec, dtype=float)
        if self.svec.shape != (3,) + self.s0.shape:
            raise ValueError(
                f"vector part shape {self.svec.shape} does not match scalar part {self.s0.shape}"
            )

    @classmethod
    def from_components(cls, c):
        c = np.asarray(c, dtype=float)
        return cls(c[0], c[1:4])

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(shape), np.zeros((3,) + tuple(shape)))

    @classmethod
    def identity(cls, shape):
        return cls(np.ones(shape), np.zeros((3,) + tuple(shape)))

    @property
    def shape(self):
        return self.s0.shape

    def components(self):
        """Stacked ``(4,) + shape`` array ``[s0, s1, s2, s3]``."""
        return np.concatenate([self.s0[None], self.svec])

    def copy(self):
        return PauliSymbol(self.s0.copy(), self.svec.copy())

    def __add__(self, other):
        return PauliSymbol(self.s0 + other.s0, self.svec + other.svec)

    def __sub__(self, other):
        return PauliSymbol(self.s0 - other.s0, self.svec - other.svec)

    def __mul__(self, c):
        return PauliSymbol(c * self.s0, c * self.svec)

    __rmul__ = __mul__

    def __neg__(self):
        return PauliSymbol(-self.s0, -self.svec)

    def sup_norm(self):
        return float(np.max(np.abs(self.components())))

    def matrix(self):
        """Matrix form, shape ``shape + (2, 2)``."""
        return compose(self.s0, self.svec)


def decompose(m, tol_herm=1e-12):
    """Pauli components of hermitian matrices.

    Parameters
    ----------
    m : array_like, shape (..., 2, 2)
    tol_herm : float
        Allowed size of the anti-hermitian part relative to ``max|m|``.

    Returns
    -------
    ndarray, shape (4, ...)
    """
    m = np.asarray(m, dtype=complex)
    anti = 0.5 * (m - np.conj(np.swapaxes(m, -1, -2)))
    scale = max(float(np.max(np.abs(m))), 1.0) if m.size else 1.0
    if m.size and np.max(np.abs(anti)) > tol_herm * scale:
        raise NonHermitian(f"anti-hermitian part {np.max(np.abs(anti)):.3e} exceeds tolerance")
    comps = 0.5 * np.einsum("...ij,sji->s...", m, SIGMA)
    return comps.real


def compose(a0, avec):
    """``a0 s0 + avec . s`` as complex matrices of shape ``a0.shape + (2, 2)``."""
    a0 = np.asarray(a0, dtype=float)
    avec = np.asarray(avec, dtype=float)
    c = np.concatenate([a0[None], avec]) if avec.ndim == a0.ndim + 1 else np.array([a0, *avec])
    return np.einsum("s...,sij->...ij", c, SIGMA)


def wedge(a, b):
    """Pointwise cross product of 3-vector fields with component axis first."""
    a = np.asarray(a)
    b = np.asarray(b)
    return np.stack(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def dot(a, b):
    return np.sum(np.asarray(a) * np.asarray(b), axis=0)


def sym_moyal_pauli(k, a, b, grid=None, jets=None):
    """Pauli components of ``(a #k b + b #k a) / 2``.

    Even orders give scalar part ``a0 #k b0 + sum_s a_s #k b_s`` and vector
    part ``a0 #k b + b0 #k a``.  For ``k = 1`` the scalar part vanishes and
    the vector part is ``i (a ^# b)``; since ``#1`` is ``i/2`` times the
    Poisson bracket the result is the real field ``-eps_jst {a_s, b_t} / 2``.

    ``jets`` may carry precomputed :class:`~graphene_moments.moyal.PauliJet`
    objects ``(jet_a, jet_b)`` to avoid repeated transforms.
    """
    from . import moyal

    if k not in (0, 1, 2):
        raise UnsupportedOrder(f"Moyal order {k} not supported (0, 1, 2 only)")
    if a.shape != b.shape:
        from .errors import GridMismatch

        raise GridMismatch("symbols live on different grids")
    if k == 0:
        s0 = a.s0 * b.s0 + dot(a.svec, b.svec)
        sv = a.s0 * b.svec + b.s0 * a.svec
        return PauliSymbol(s0, sv)
    if jets is None:
        jets = (moyal.PauliJet(a, grid, order=k), moyal.PauliJet(b, grid, order=k))
    ja, jb = jets
    if k == 1:
        # m1(f, g) = {f, g} / 2, the real factor of f #1 g
        def m(s, t):
            return moyal.moyal1_from_jets(ja.comp[s], jb.comp[t])

        v1 = -(m(2, 3) - m(3, 2))
        v2 = -(m(3, 1) - m(1, 3))
        v3 = -(m(1, 2) - m(2, 1))
        return PauliSymbol(np.zeros(a.shape), np.stack([v1, v2, v3]))

    def m(s, t):
        return moyal.moyal2_from_jets(ja.comp[s], jb.comp[t])

    s0 = m(0, 0) + m(1, 1) + m(2, 2) + m(3, 3)
    sv = np.stack([m(0, s) + m(s, 0) for s in (1, 2, 3)])
    return PauliSymbol(s0, sv)
