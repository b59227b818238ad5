"""Periodic position grid, truncated momentum grid and spectral derivatives.

Scalar phase-space fields are arrays of shape ``(n_r, n_r, n_p, n_p)``;
position fields are ``(n_r, n_r)``.  Vector fields carry their component
axis first, e.g. ``(3, n_r, n_r)``.

Derivatives in r are exact for band-limited periodic data.  Derivatives
in p treat the momentum box as one period; this is accurate for symbols
that are periodic on the box or decay like a Gaussian well before
``p_max``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

_WORKERS = 1


def set_threads(n):
    """Set the number of FFT worker threads used by every transform."""
    global _WORKERS
    n = int(n)
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _WORKERS = n


def get_threads():
    return _WORKERS


def _is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PositionGrid:
    """Uniform periodic grid on ``[0, length)^2``."""

    n: int
    length: float = 2 * np.pi

    def __post_init__(self):
        if not _is_pow2(self.n):
            raise ValueError(f"position points per axis must be a power of two, got {self.n}")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def dr(self):
        return self.length / self.n

    @cached_property
    def r(self):
        return self.dr * np.arange(self.n)

    @cached_property
    def k(self):
        return 2 * np.pi * sfft.fftfreq(self.n, self.dr)

    def mesh(self):
        return np.meshgrid(self.r, self.r, indexing="ij")

    @property
    def cell_area(self):
        return self.dr * self.dr


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Tensor product of a periodic 2D position grid and a 2D momentum box.

    Momentum nodes are cell centred, ``p_j = -p_max + (j + 1/2) dp``, so an
    even ``n_p`` never places a node on ``p = 0`` and the grid is symmetric
    under ``p -> -p``.
    """

    n_r: int
    n_p: int
    length: float = 2 * np.pi
    p_max: float = 8.0

    def __post_init__(self):
        if not _is_pow2(self.n_r) or not _is_pow2(self.n_p):
            raise ValueError("n_r and n_p must be powers of two")
        if self.p_max < 6:
            raise ValueError(f"p_max must be >= 6 (got {self.p_max})")

    @property
    def shape(self):
        return (self.n_r, self.n_r, self.n_p, self.n_p)

    @cached_property
    def position(self):
        return PositionGrid(self.n_r, self.length)

    @property
    def dr(self):
        return self.length / self.n_r

    @property
    def dp(self):
        return 2 * self.p_max / self.n_p

    @cached_property
    def r(self):
        return self.dr * np.arange(self.n_r)

    @cached_property
    def p(self):
        return -self.p_max + (np.arange(self.n_p) + 0.5) * self.dp

    @cached_property
    def kr(self):
        return 2 * np.pi * sfft.fftfreq(self.n_r, self.dr)

    @cached_property
    def kp(self):
        return 2 * np.pi * sfft.fftfreq(self.n_p, self.dp)

    def r_mesh(self):
        """Broadcastable ``(r1, r2)``, each of shape ``(n_r, n_r, 1, 1)``."""
        r1 = self.r[:, None, None, None]
        r2 = self.r[None, :, None, None]
        return r1, r2

    def p_mesh(self):
        """Broadcastable ``(p1, p2)``, each of shape ``(1, 1, n_p, n_p)``."""
        p1 = self.p[None, None, :, None]
        p2 = self.p[None, None, None, :]
        return p1, p2

    @cached_property
    def p_abs(self):
        p1, p2 = self.p_mesh()
        return np.hypot(p1, p2)

    def momentum_2d(self):
        """``(p1, p2)`` as plain ``(n_p, n_p)`` arrays."""
        return np.meshgrid(self.p, self.p, indexing="ij")

    def full(self, position_field):
        """Lift a position field to phase-space broadcasting shape."""
        return np.asarray(position_field)[..., :, :, None, None]


# ---------------------------------------------------------------------------
# spectral derivatives


def _axis_multiplier(k, count, n, rfft_axis=False):
    """``(i k)^count`` with the Nyquist mode dropped for odd counts."""
    mult = (1j * k) ** count
    if count % 2 == 1 and n % 2 == 0:
        mult = mult.copy()
        nyq = n // 2
        if rfft_axis:
            mult[-1] = 0.0
        else:
            mult[nyq] = 0.0
    return mult


class SpectralJet:
    """Fourier image of a phase-space field; draws any mixed derivative.

    Axes are numbered 0, 1 (r1, r2) and 2, 3 (p1, p2).  One forward
    transform serves every derivative requested afterwards.
    """

    def __init__(self, f, grid):
        self.grid = grid
        f = np.asarray(f)
        if f.shape != grid.shape:
            from .errors import GridMismatch

            raise GridMismatch(f"field shape {f.shape} != grid shape {grid.shape}")
        self.is_real = np.isrealobj(f)
        axes = (0, 1, 2, 3)
        if self.is_real:
            self._hat = sfft.rfftn(f, axes=axes, workers=_WORKERS)
        else:
            self._hat = sfft.fftn(f, axes=axes, workers=_WORKERS)

    def d(self, *axes):
        counts = [0, 0, 0, 0]
        for ax in axes:
            counts[ax] += 1
        mult = _jet_multiplier(self.grid, self.is_real, tuple(counts))
        # a multiplied spectrum is a fresh array the inverse transform may reuse
        fresh = mult is not None
        hat = self._hat * mult if fresh else self._hat
        if self.is_real:
            return sfft.irfftn(hat, s=self.grid.shape, axes=(0, 1, 2, 3), workers=_WORKERS, overwrite_x=fresh)
        return sfft.ifftn(hat, axes=(0, 1, 2, 3), workers=_WORKERS, overwrite_x=fresh)


_MULT_CACHE = {}


def _jet_multiplier(grid, is_real, counts):
    """Full-shape spectral multiplier for a mixed derivative, cached per grid."""
    if not any(counts):
        return None
    key = (grid, is_real, counts)
    mult = _MULT_CACHE.get(key)
    if mult is None:
        kp_last = 2 * np.pi * sfft.rfftfreq(grid.n_p, grid.dp) if is_real else grid.kp
        kvec = [grid.kr, grid.kr, grid.kp, kp_last]
        nvec = [grid.n_r, grid.n_r, grid.n_p, grid.n_p]
        mult = np.ones((1, 1, 1, 1), dtype=complex)
        for ax, c in enumerate(counts):
            if c == 0:
                continue
            m = _axis_multiplier(kvec[ax], c, nvec[ax], rfft_axis=(is_real and ax == 3))
            shape = [1, 1, 1, 1]
            shape[ax] = -1
            mult = mult * m.reshape(shape)
        if len(_MULT_CACHE) > 256:
            _MULT_CACHE.clear()
        _MULT_CACHE[key] = mult
    return mult


def _position_transform(f):
    return sfft.rfftn(f, axes=(0, 1), workers=_WORKERS)


def _position_inverse(hat, n):
    return sfft.irfftn(hat, s=(n, n), axes=(0, 1), workers=_WORKERS)


def _pos_multipliers(pgrid, trailing):
    n = pgrid.n
    k1 = pgrid.k
    k2 = 2 * np.pi * sfft.rfftfreq(n, pgrid.dr)
    pad = (1,) * trailing
    k1 = k1.reshape((-1, 1) + pad)
    k2 = k2.reshape((1, -1) + pad)
    return k1, k2


def _as_position_grid(grid):
    return grid.position if isinstance(grid, PhaseSpaceGrid) else grid


def gradient_r(f, grid):
    """Spectral gradient along the two leading (position) axes of ``f``.

    Returns an array of shape ``(2,) + f.shape``.
    """
    pgrid = _as_position_grid(grid)
    f = np.asarray(f, dtype=float)
    n = pgrid.n
    hat = _position_transform(f)
    k1, k2 = _pos_multipliers(pgrid, f.ndim - 2)
    d1 = 1j * k1
    d2 = 1j * k2
    if n % 2 == 0:
        d1 = d1.copy()
        d1[n // 2] = 0.0
        d2 = d2.copy()
        d2[:, -1] = 0.0
    g1 = _position_inverse(hat * d1, n)
    g2 = _position_inverse(hat * d2, n)
    out = np.empty((2,) + f.shape)
    out[0] = g1
    out[1] = g2
    return out


def gradient_components(v, grid):
    """Gradient of a component-first vector field ``(C, n, n)``; shape ``(2, C, n, n)``."""
    v = np.asarray(v, dtype=float)
    return np.stack([gradient_r(v[k], grid) for k in range(v.shape[0])], axis=1)


def laplacian_r(f, grid):
    """Spectral Laplacian along the position axes (Nyquist mode kept)."""
    pgrid = _as_position_grid(grid)
    f = np.asarray(f, dtype=float)
    hat = _position_transform(f)
    k1, k2 = _pos_multipliers(pgrid, f.ndim - 2)
    return _position_inverse(-(k1 ** 2 + k2 ** 2) * hat, pgrid.n)


def divergence_r(v, grid):
    """In-plane divergence ``d1 v[0] + d2 v[1]``; a third component is ignored."""
    pgrid = _as_position_grid(grid)
    v = np.asarray(v, dtype=float)
    n = pgrid.n
    k1, k2 = _pos_multipliers(pgrid, v.ndim - 3)
    d1 = 1j * k1
    d2 = 1j * k2
    if n % 2 == 0:
        d1 = d1.copy()
        d1[n // 2] = 0.0
        d2 = d2.copy()
        d2[:, -1] = 0.0
    hat = d1 * _position_transform(v[0]) + d2 * _position_transform(v[1])
    return _position_inverse(hat, n)


def hessian_r(f, grid):
    """Second derivatives ``(f_11, f_12, f_22)`` along the position axes."""
    pgrid = _as_position_grid(grid)
    f = np.asarray(f, dtype=float)
    n = pgrid.n
    hat = _position_transform(f)
    k1, k2 = _pos_multipliers(pgrid, f.ndim - 2)
    d1 = 1j * k1
    d2 = 1j * k2
    if n % 2 == 0:
        d1 = d1.copy()
        d1[n // 2] = 0.0
        d2 = d2.copy()
        d2[:, -1] = 0.0
    f11 = _position_inverse(-(k1 ** 2) * hat, n)
    f22 = _position_inverse(-(k2 ** 2) * hat, n)
    f12 = _position_inverse(d1 * d2 * hat, n)
    return f11, f12, f22


def integrate_p(f, grid):
    """Trapezoid (equivalently midpoint) rule over the two momentum axes."""
    return np.sum(f, axis=(-2, -1)) * grid.dp * grid.dp


def integrate_r(f, grid):
    pgrid = _as_position_grid(grid)
    return np.sum(f, axis=(0, 1)) * pgrid.cell_area
