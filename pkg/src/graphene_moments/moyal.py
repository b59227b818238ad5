"""Moyal expansion terms, Poisson bracket and the potential operator.

Representation convention: ``f #1 g = (i/2){f, g}`` is purely imaginary
for real symbols, so :func:`moyal_term` with ``k = 1`` returns the real
field ``{f, g} / 2`` that multiplies ``i``.
"""

from functools import cached_property

import numpy as np
import scipy.fft as sfft

from . import grid as _grid
from .errors import GridMismatch, NonPositiveEpsilon, UnsupportedOrder
from .grid import SpectralJet

R_AXES = (0, 1)
P_AXES = (2, 3)


class ScalarJet:
    """First and (optionally) second phase-space derivatives of one field.

    Derivatives are transformed back on first access only.
    """

    def __init__(self, f, grid, order=2):
        self.value = np.asarray(f)
        self.order = order
        self._spec = SpectralJet(f, grid)

    @cached_property
    def r(self):
        return [self._spec.d(0), self._spec.d(1)]

    @cached_property
    def p(self):
        return [self._spec.d(2), self._spec.d(3)]

    def _second(self):
        if self.order < 2:
            raise AttributeError("second derivatives need order=2")

    @cached_property
    def rr(self):
        self._second()
        d = self._spec.d
        r01 = d(0, 1)
        return [[d(0, 0), r01], [r01, d(1, 1)]]

    @cached_property
    def pp(self):
        self._second()
        d = self._spec.d
        p23 = d(2, 3)
        return [[d(2, 2), p23], [p23, d(3, 3)]]

    @cached_property
    def rp(self):
        # rp[j][s] = d_{r_j} d_{p_s}
        self._second()
        return [[self._spec.d(j, 2 + s) for s in range(2)] for j in range(2)]


class PauliJet:
    """Jets of the four Pauli components of a symbol."""

    def __init__(self, sym, grid, order=2):
        self.comp = [ScalarJet(c, grid, order) for c in sym.components()]


def moyal1_from_jets(jf, jg):
    out = jf.r[0] * jg.p[0] - jf.p[0] * jg.r[0]
    out += jf.r[1] * jg.p[1] - jf.p[1] * jg.r[1]
    return 0.5 * out


def moyal2_from_jets(jf, jg):
    # the rr and pp blocks are symmetric, so the off-diagonal pair appears twice
    frr, fpp, frp = jf.rr, jf.pp, jf.rp
    grr, gpp, grp = jg.rr, jg.pp, jg.rp
    out = frr[0][0] * gpp[0][0]
    out += frr[1][1] * gpp[1][1]
    out += fpp[0][0] * grr[0][0]
    out += fpp[1][1] * grr[1][1]
    out += 2.0 * (frr[0][1] * gpp[0][1] + fpp[0][1] * grr[0][1])
    cross = frp[0][0] * grp[0][0]
    cross += frp[1][1] * grp[1][1]
    cross += frp[0][1] * grp[1][0]
    cross += frp[1][0] * grp[0][1]
    out -= 2.0 * cross
    out *= -0.125
    return out


def _check(f1, f2, grid):
    if np.shape(f1) != grid.shape or np.shape(f2) != grid.shape:
        raise GridMismatch("fields do not match the phase-space grid")


def moyal_term(k, f1, f2, grid):
    """k-th term of the semiclassical Moyal expansion of ``f1 # f2``.

    k = 0: pointwise product.  k = 1: the real field ``{f1, f2} / 2``
    (the stored factor of ``i``).  k = 2: the symmetric second-order term.
    """
    if k not in (0, 1, 2):
        raise UnsupportedOrder(f"Moyal order {k} not supported (0, 1, 2 only)")
    _check(f1, f2, grid)
    if k == 0:
        return np.asarray(f1) * np.asarray(f2)
    j1 = ScalarJet(f1, grid, order=k)
    j2 = ScalarJet(f2, grid, order=k)
    if k == 1:
        return moyal1_from_jets(j1, j2)
    return moyal2_from_jets(j1, j2)


def poisson_bracket(f, g, grid):
    """``{f, g} = grad_r f . grad_p g - grad_p f . grad_r g``."""
    _check(f, g, grid)
    return 2.0 * moyal1_from_jets(ScalarJet(f, grid, 1), ScalarJet(g, grid, 1))


class ThetaOperator:
    """Exact (non-expanded) pseudo-differential potential operator.

    ``Theta_eps(V) w`` is applied in the Fourier variable dual to p: the
    p-transform of ``w`` is multiplied by ``(i/eps)[V(r + eps xi/2) -
    V(r - eps xi/2)]`` with shifted potentials obtained by Fourier
    interpolation in r.  In the limit ``eps -> 0`` it tends to
    ``-grad V . grad_p w``.

    The multiplier depends only on ``(V, eps, grid)`` and is built once.
    """

    def __init__(self, potential, eps, grid):
        if not eps > 0:
            raise NonPositiveEpsilon(f"epsilon must be positive, got {eps}")
        potential = np.asarray(potential, dtype=float)
        if potential.shape != (grid.n_r, grid.n_r):
            raise GridMismatch("potential must live on the position grid")
        self.eps = eps
        self.grid = grid
        n, m = grid.n_r, grid.n_p
        vhat = sfft.fft2(potential, workers=_grid.get_threads())
        if n % 2 == 0:
            vhat[n // 2, :] = 0.0
            vhat[:, n // 2] = 0.0
        q1 = grid.kr[:, None, None, None]
        q2 = grid.kr[None, :, None, None]
        k1 = grid.kp[None, None, :, None]
        k2 = 2 * np.pi * sfft.rfftfreq(m, grid.dp)[None, None, None, :]
        # V(r + eps xi/2) - V(r - eps xi/2) = sum_q vhat 2i sin(eps q.xi/2) e^{iqr}; a
        # p-mode e^{i kappa p} meets xi = -kappa, so the mode is multiplied by
        # i * (2/eps) Im ifft[vhat sin(eps q.kappa/2)]
        phase = np.sin(0.5 * eps * (q1 * k1 + q2 * k2))
        mult = sfft.ifft2(vhat[:, :, None, None] * phase, axes=(0, 1), workers=_grid.get_threads())
        mult = (2.0 / eps) * mult.imag
        if m % 2 == 0:
            mult[:, :, m // 2, :] = 0.0
            mult[:, :, :, -1] = 0.0
        self._mult = mult
        self.is_zero = not np.any(vhat)

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        if self.is_zero:
            return np.zeros_like(w)
        m = self.grid.n_p
        hat = sfft.rfftn(w, axes=(-2, -1), workers=_grid.get_threads())
        # i * mult: the multiplier of the transform is imaginary
        return sfft.irfftn(1j * self._mult * hat, s=(m, m), axes=(-2, -1), workers=_grid.get_threads())


def theta_epsilon(potential, w, eps, grid):
    """One-shot :class:`ThetaOperator` application."""
    return ThetaOperator(potential, eps, grid)(w)
