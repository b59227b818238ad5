"""Spinorial Wigner-BGK reference solver in the diffusive and hydrodynamic scalings.

A Wigner field is stored as a ``(4, n_r, n_r, n_p, n_p)`` array of Pauli
components.  The transport operator is

``T0 = p . grad w0 / (2 gamma) + (eps/2) div w + Theta w0``
``Ts = p . grad ws / (2 gamma) + (eps/2) d_s w0 + Theta ws + (w ^ p)_s``

with ``p = (p1, p2, 0)``.  The diffusive scaling evolves
``d_t w = [-T w + (g - w)/tau] / tau`` and the hydrodynamic scaling
``d_t w = -T w + (g - w)/tau``, where ``g`` is the closure equilibrium
built from the instantaneous moments of ``w``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import closure as _c
from . import fluid as _f
from . import grid as _g
from .errors import DtUnderflow, OriginSingularity
from .moyal import ThetaOperator
from .oracle import _check_tail
from .pauli import SIGMA, PauliSymbol

SCALINGS = ("diffusive", "hydrodynamic")
CLOSURES = {"diffusive": ("qde1", "qde2"), "hydrodynamic": ("qhe1", "qhe2")}
# relaxation resolution: dt <= RELAX_FRACTION * tau^2 (diffusive) or * tau (hydrodynamic)
RELAX_FRACTION = 0.1
C_TRANSPORT = 0.5
MAX_STEPS = 10 ** 6


@dataclass
class WignerField:
    """Pauli components of a Wigner function and the scaling it evolves in."""

    w: PauliSymbol
    scaling_tag: str = "diffusive"

    def __post_init__(self):
        if self.scaling_tag not in SCALINGS:
            raise ValueError(f"scaling must be one of {SCALINGS}, got {self.scaling_tag!r}")

    def components(self):
        return self.w.components()


# ---------------------------------------------------------------------------
# band structure


def band_projection(p1, p2):
    """Band projectors ``P_pm(p) = (s0 pm (p/|p|) . s) / 2``.

    Returns two complex arrays of shape ``p1.shape + (2, 2)``.
    """
    p1, p2 = np.broadcast_arrays(np.asarray(p1, dtype=float), np.asarray(p2, dtype=float))
    rho = np.hypot(p1, p2)
    if np.any(rho == 0):
        raise OriginSingularity("band projectors are undefined at p = 0")
    u = np.stack([p1 / rho, p2 / rho, np.zeros_like(rho)])
    half = 0.5 * np.einsum("s...,sij->...ij", u, SIGMA[1:])
    ident = 0.5 * SIGMA[0]
    return ident + half, ident - half


def band_energy(p1, p2, m=1.0, v_F=1.0):
    """Band energies ``E_pm = |p|^2 / 2m pm v_F |p|``."""
    rho = np.hypot(np.asarray(p1, dtype=float), np.asarray(p2, dtype=float))
    base = rho ** 2 / (2 * m)
    return base + v_F * rho, base - v_F * rho


def _as_components(w):
    if isinstance(w, WignerField):
        return w.components()
    if isinstance(w, PauliSymbol):
        return w.components()
    return np.asarray(w, dtype=float)


def band_densities(w, grid, tail_tol=1e-9):
    """``n_pm = <w0 pm (p/|p|) . w>`` by midpoint quadrature."""
    c = _as_components(w)
    _check_tail(c, grid, tail_tol)
    n0, ns = _c.band_moments(PauliSymbol.from_components(c), grid)
    return n0 + ns, n0 - ns


def fluid_moments(w, grid, scaling):
    """Fluid state matching the scaling: ``DiffusiveState`` or ``HydroState``."""
    sym = PauliSymbol.from_components(_as_components(w))
    if scaling == "diffusive":
        return _f.DiffusiveState(*_c.band_moments(sym, grid))
    return _f.HydroState(*_c.hydro_moments(sym, grid))


def equilibrium(state, closure, params, grid):
    """Closure equilibrium of a fluid state as a ``(4, ...)`` component array."""
    if closure == "qde1":
        eq = _c.equilibrium_qde1(state.n0, state.nsigma, params, grid)
    elif closure == "qde2":
        eq = _c.equilibrium_qde2(state.n0, state.nsigma, params, grid)
    elif closure == "qhe1":
        eq = _c.equilibrium_qhe1(state.n0, state.nvec, state.J, params, grid)
    elif closure == "qhe2":
        eq = _c.equilibrium_qhe2(state.n0, state.nvec, state.J, params, grid)
    else:
        raise ValueError(f"unknown closure {closure!r}")
    return np.broadcast_to(eq.g.components(), (4,) + grid.shape)


# ---------------------------------------------------------------------------
# transport


class Transport:
    """Transport operator ``T`` for fixed parameters, potential and grid."""

    def __init__(self, params, grid):
        self.grid = grid
        self.eps = params.epsilon
        self.gamma = params.gamma
        n = grid.n_r
        k1 = grid.kr.copy()
        k2 = 2 * np.pi * sfft.rfftfreq(n, grid.dr)
        if n % 2 == 0:
            k1[n // 2] = 0.0
            k2[-1] = 0.0
        self._ik1 = 1j * k1[:, None, None, None]
        self._ik2 = 1j * k2[None, :, None, None]
        p1, p2 = grid.p_mesh()
        self._p1, self._p2 = p1, p2
        self._adv = (self._ik1 * p1 + self._ik2 * p2) / (2 * self.gamma)
        V = params.potential_on(n)
        self.theta = None
        if self.eps > 0 and np.ptp(V) > 0:
            self.theta = ThetaOperator(V, self.eps, grid)
        elif self.eps == 0 and np.ptp(V) > 0:
            self._gradV = _g.gradient_r(V, grid.position)
        self._V = V

    def _fwd(self, f):
        return sfft.rfftn(f, axes=(-4, -3), workers=_g.get_threads())

    def _inv(self, h):
        n = self.grid.n_r
        return sfft.irfftn(h, s=(n, n), axes=(-4, -3), workers=_g.get_threads())

    def _potential_term(self, c):
        if self.theta is not None:
            return self.theta(c)
        if self.eps == 0 and np.ptp(self._V) > 0:
            # classical limit of Theta: -grad V . grad_p
            out = np.empty_like(c)
            for s in range(c.shape[0]):
                jet = _g.SpectralJet(c[s], self.grid)
                out[s] = -(self.grid.full(self._gradV[0]) * jet.d(2)
                           + self.grid.full(self._gradV[1]) * jet.d(3))
            return out
        return None

    def __call__(self, c, precession=True):
        """``T w`` for a component array ``c`` of shape ``(4,) + grid.shape``."""
        hat = self._fwd(c)
        half = 0.5 * self.eps
        out = np.empty_like(c)
        out[0] = self._inv(self._adv * hat[0] + half * (self._ik1 * hat[1] + self._ik2 * hat[2]))
        out[1] = self._inv(self._adv * hat[1] + half * self._ik1 * hat[0])
        out[2] = self._inv(self._adv * hat[2] + half * self._ik2 * hat[0])
        out[3] = self._inv(self._adv * hat[3])
        pot = self._potential_term(c)
        if pot is not None:
            out += pot
        if precession:
            p1, p2 = self._p1, self._p2
            # (w ^ p) with p = (p1, p2, 0)
            out[1] -= c[3] * p2
            out[2] += c[3] * p1
            out[3] += c[1] * p2 - c[2] * p1
        return out

    def max_rate(self):
        """Largest spectral rate of the linear operator, used for the step bound."""
        g = self.grid
        kmax = np.sqrt(2.0) * np.pi / g.dr
        rate = kmax * (np.sqrt(2.0) * g.p_max / (2 * self.gamma) + 0.5 * self.eps)
        rate += np.sqrt(2.0) * g.p_max  # precession
        if np.ptp(self._V) > 0:
            gV = np.sqrt(np.sum(_g.gradient_r(self._V, g.position) ** 2, axis=0)).max()
            rate += gV * np.pi / g.dp
        return rate


def _rhs(c, g, tau, scaling, transport):
    out = -transport(c) + (g - c) / tau
    return out / tau if scaling == "diffusive" else out


def rhs_wigner_diffusive(w, params, grid, closure="qde1", transport=None):
    """``d_t w = [-T w + (g - w)/tau] / tau`` with ``g`` from the band densities of ``w``."""
    c = _as_components(w)
    transport = transport or Transport(params, grid)
    g = equilibrium(fluid_moments(c, grid, "diffusive"), closure, params, grid)
    return PauliSymbol.from_components(_rhs(c, g, params.tau, "diffusive", transport))


def rhs_wigner_hydro(w, params, grid, closure="qhe1", transport=None):
    """``d_t w = -T w + (g - w)/tau`` with ``g`` from ``(n0, n, J)`` of ``w``."""
    c = _as_components(w)
    transport = transport or Transport(params, grid)
    g = equilibrium(fluid_moments(c, grid, "hydrodynamic"), closure, params, grid)
    return PauliSymbol.from_components(_rhs(c, g, params.tau, "hydrodynamic", transport))


# ---------------------------------------------------------------------------
# split-step integration


def relax(c, g, h, tau, scaling):
    """Exact BGK substep ``w <- g + (w - g) e^{-h/tau^2}`` (``e^{-h/tau}`` hydrodynamic)."""
    rate = 1.0 / tau ** 2 if scaling == "diffusive" else 1.0 / tau
    return g + (c - g) * np.exp(-h * rate)


def _relax_step(c, h, tau, scaling, closure, params, grid):
    g = equilibrium(fluid_moments(c, grid, scaling), closure, params, grid)
    return relax(c, g, h, tau, scaling)


def _transport_step(c, h, tau, scaling, transport):
    scale = 1.0 / tau if scaling == "diffusive" else 1.0
    f = lambda x: -scale * transport(x)
    k1 = f(c)
    k2 = f(c + 0.5 * h * k1)
    k3 = f(c + 0.5 * h * k2)
    k4 = f(c + h * k3)
    return c + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def strang_step(c, h, tau, scaling, closure, params, grid, transport):
    """Relax ``h/2``, transport ``h`` (RK4), relax ``h/2``."""
    c = _relax_step(c, 0.5 * h, tau, scaling, closure, params, grid)
    c = _transport_step(c, h, tau, scaling, transport)
    return _relax_step(c, 0.5 * h, tau, scaling, closure, params, grid)


def stable_dt(tau, scaling, params, grid, transport=None):
    """Largest step resolving the relaxation and keeping RK4 transport stable."""
    transport = transport or Transport(params, grid)
    relax_dt = RELAX_FRACTION * (tau ** 2 if scaling == "diffusive" else tau)
    speed = transport.max_rate() / (tau if scaling == "diffusive" else 1.0)
    return min(relax_dt, C_TRANSPORT * 2.8 / speed)


@dataclass
class KineticRun:
    """Moment trajectory of one kinetic run."""

    tau: float
    times: list
    states: list
    dt: float
    steps: int
    records: list = field(default_factory=list)


def _time_grid(t_end, record_times):
    if record_times is None:
        return [float(t_end)]
    out = sorted(float(t) for t in record_times if 0 < t <= t_end)
    if not out or out[-1] < t_end:
        out.append(float(t_end))
    return out


def run_single(state, params, grid, scaling, t_end, closure=None, dt=None, record_times=None,
               max_steps=MAX_STEPS):
    """Integrate one kinetic problem from the closure equilibrium of ``state``.

    Moments are recorded at ``record_times`` (the fluid solver's output
    times) and at ``t_end``.  Raises :class:`DtUnderflow` when the step
    bound would need more than ``max_steps`` steps.
    """
    if scaling not in SCALINGS:
        raise ValueError(f"scaling must be one of {SCALINGS}")
    closure = closure or CLOSURES[scaling][0]
    tau = params.tau
    transport = Transport(params, grid)
    bound = stable_dt(tau, scaling, params, grid, transport)
    dt = bound if dt is None else min(dt, bound)
    if t_end / dt > max_steps:
        raise DtUnderflow(f"tau = {tau:g} needs dt <= {dt:.3e}, more than {max_steps} steps")
    c = np.array(equilibrium(state, closure, params, grid))
    run = KineticRun(tau, [0.0], [fluid_moments(c, grid, scaling)], dt, 0)
    run.records.append(_f.diagnostics(run.states[0], grid.position, 0.0))
    t = 0.0
    for target in _time_grid(t_end, record_times):
        n = max(1, int(np.ceil((target - t) / dt - 1e-9)))
        h = (target - t) / n
        for _ in range(n):
            c = strang_step(c, h, tau, scaling, closure, params, grid, transport)
            run.steps += 1
        t = target
        st = fluid_moments(c, grid, scaling)
        run.times.append(t)
        run.states.append(st)
        run.records.append(_f.diagnostics(st, grid.position, t))
    return run


def run_kinetic(state, params, grid, scaling, t_end, taus, closure=None, record_times=None):
    """Moment trajectories of the kinetic problem for each relaxation time in ``taus``."""
    from dataclasses import replace

    return {tau: run_single(state, replace(params, tau=tau), grid, scaling, t_end, closure,
                            record_times=record_times)
            for tau in taus}


def moment_error(a, b):
    """Sup-norm distance of two fluid states of the same type."""
    return (a - b).sup_norm()
