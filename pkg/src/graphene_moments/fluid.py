"""Explicit time integration of the four fluid models on a periodic grid.

Vector fields carry their component axis first.  The divergence of a
tensor product contracts the second factor,
``(div (A (x) B))_i = d_j (A_i B_j)``, with ``j`` running over the two
in-plane directions.
"""

from dataclasses import dataclass, fields, replace

import numpy as np

from . import grid as _g
from .closure import GAMMA_ANALYTIC, SQRT_HALF_PI, spin_frame_terms
from .errors import (
    DtUnderflow,
    NonPositiveDensity,
    PolarizationOverflow,
    StepRejected,
)
from .pauli import wedge

MODELS = ("qde1", "qde2", "qhe1", "qhe2")
C_DIFFUSIVE = 0.2
C_HYDRO = 0.4
MAX_RETRIES = 10


class _FieldState:
    """Arithmetic shared by the state containers (used by the RK stages)."""

    def arrays(self):
        return [getattr(self, f.name) for f in fields(self)]

    def _map(self, fn, other=None):
        if other is None:
            vals = [fn(a) for a in self.arrays()]
        else:
            vals = [fn(a, b) for a, b in zip(self.arrays(), other.arrays())]
        return type(self)(*vals)

    def __add__(self, other):
        return self._map(np.add, other)

    def __sub__(self, other):
        return self._map(np.subtract, other)

    def __mul__(self, c):
        return self._map(lambda a: c * a)

    __rmul__ = __mul__

    def copy(self):
        return self._map(np.copy)

    def sup_norm(self):
        return max(float(np.max(np.abs(a))) for a in self.arrays())


@dataclass
class DiffusiveState(_FieldState):
    """Particle density ``n0`` and pseudo-spin polarization ``nsigma``."""

    n0: np.ndarray
    nsigma: np.ndarray

    def __post_init__(self):
        self.n0 = np.asarray(self.n0, dtype=float)
        self.nsigma = np.asarray(self.nsigma, dtype=float)

    @property
    def n_plus(self):
        return self.n0 + self.nsigma

    @property
    def n_minus(self):
        return self.n0 - self.nsigma


@dataclass
class HydroState(_FieldState):
    """Density ``n0``, spin vector ``nvec`` (3 components), flow ``J`` (2 components)."""

    n0: np.ndarray
    nvec: np.ndarray
    J: np.ndarray

    def __post_init__(self):
        self.n0 = np.asarray(self.n0, dtype=float)
        self.nvec = np.asarray(self.nvec, dtype=float)
        self.J = np.asarray(self.J, dtype=float)
        if self.nvec.shape != (3,) + self.n0.shape or self.J.shape != (2,) + self.n0.shape:
            raise ValueError("nvec must have 3 and J 2 components over the density grid")


# ---------------------------------------------------------------------------
# building blocks


def bohm_potential(n0, eps, grid):
    """``V_B = -(eps^2/6) Lap(sqrt n0) / sqrt n0``."""
    n0 = np.asarray(n0, dtype=float)
    if np.any(~(n0 > 0)):
        raise NonPositiveDensity("Bohm potential needs a positive density")
    s = np.sqrt(n0)
    return -(eps ** 2 / 6.0) * _g.laplacian_r(s, grid) / s


def _pos(grid):
    return grid.position if isinstance(grid, _g.PhaseSpaceGrid) else grid


def _tensor_div(A, B, grid):
    """``d_j (A_i B_j)`` for ``A`` with any number of components and planar ``B``."""
    return np.stack([_g.divergence_r(A[i] * B[:2], grid) for i in range(A.shape[0])])


def _potential(params, grid):
    return params.potential_on(grid.n)


def _check_polarization(n0, mag, delta):
    if np.any(~(n0 > 0)):
        raise NonPositiveDensity("n0 must stay positive")
    if np.any(mag >= (1 - delta) * n0):
        raise PolarizationOverflow("polarization reached the density")


def diffusion_coefficients(params):
    """``(D00, D0s, Ds0, Dss)`` of the second diffusive model."""
    eps, gam = params.epsilon, params.gamma
    d00 = 1 / (4 * gam ** 2) + eps ** 2 / 4 * (2 - gam * (4 - np.pi))
    d0s = eps / (8 * gam) * SQRT_HALF_PI
    return d00, d0s, d0s, 1 / (4 * gam ** 2)


# ---------------------------------------------------------------------------
# right-hand sides


def rhs_qde1(state, params, grid):
    """First quantum diffusive model (accurate to first order in eps)."""
    grid = _pos(grid)
    n0, ns = state.n0, state.nsigma
    _check_polarization(n0, np.abs(ns), params.delta_pol)
    eps, gam, gh = params.epsilon, params.gamma, params.gamma_hat
    V = _potential(params, grid)
    gV = _g.gradient_r(V, grid)
    lapV = _g.laplacian_r(V, grid)
    lap = lambda f: _g.laplacian_r(f, grid)
    dn0 = lap(n0 + 0.5 * eps * gh * ns) / (4 * gam ** 2) + _g.divergence_r(n0 * gV, grid) / (2 * gam)

    g0 = _g.gradient_r(n0, grid)
    gs = _g.gradient_r(ns, grid)
    R = np.sqrt(n0 ** 2 - ns ** 2)
    zero = np.zeros_like(n0)
    # the cross product of two planar gradients points out of plane
    cross = wedge(np.stack([g0[0], g0[1], zero]), np.stack([gs[0], gs[1], zero]))
    coef = 0.5 * (1 + n0 / R) / R
    vec = np.stack([gs[0] + eps * gh * g0[0], gs[1] + eps * gh * g0[1], zero]) + coef * cross
    gV3 = np.stack([gV[0], gV[1], zero])
    dns = lap(ns + 0.5 * eps * gh * n0) / (4 * gam ** 2)
    dns -= np.sum(gV3 * vec, axis=0) / (2 * gam)
    dns -= 0.5 * np.sum(gV ** 2, axis=0) * (ns + eps * gh * (GAMMA_ANALYTIC - 1) * n0)
    dns -= 3 / (4 * gam) * lapV * (ns + eps * gh * n0)
    return DiffusiveState(dn0, dns)


def rhs_qde2(state, params, grid):
    """Second quantum diffusive model (accurate to second order in eps)."""
    grid = _pos(grid)
    n0, ns = state.n0, state.nsigma
    _check_polarization(n0, np.abs(ns), params.delta_pol)
    eps, gam, gh = params.epsilon, params.gamma, params.gamma_hat
    d00, d0s, ds0, dss = diffusion_coefficients(params)
    V = _potential(params, grid)
    VB = bohm_potential(n0, eps, grid) if eps else 0.0
    gV = _g.gradient_r(V, grid)
    gVt = _g.gradient_r(V + VB, grid)
    lapV = _g.laplacian_r(V, grid)
    ln0 = _g.laplacian_r(n0, grid)
    lns = _g.laplacian_r(ns, grid)
    dn0 = d00 * ln0 + d0s * lns + _g.divergence_r(n0 * gVt, grid) / (2 * gam)
    m = ns + eps * gh * n0
    dns = ds0 * ln0 + dss * lns - _g.divergence_r(m * gV, grid) / (2 * gam)
    dns += 0.5 * np.sum(gV ** 2, axis=0) * (GAMMA_ANALYTIC * ns + eps * gh * (2 + GAMMA_ANALYTIC) * n0)
    dns += lapV * m / (4 * gam)
    return DiffusiveState(dn0, dns)


def _hydro_common(state, params, grid):
    n0, nv, J = state.n0, state.nvec, state.J
    mag = np.sqrt(np.sum(nv ** 2, axis=0))
    _check_polarization(n0, mag, params.delta_pol)
    J3 = np.stack([J[0], J[1], np.zeros_like(n0)])
    return n0, nv, J, J3


def rhs_qhe1(state, params, grid):
    """First quantum hydrodynamic model (accurate to first order in eps)."""
    grid = _pos(grid)
    n0, nv, J, J3 = _hydro_common(state, params, grid)
    eps, gam = params.epsilon, params.gamma
    V = _potential(params, grid)
    t = spin_frame_terms(n0, nv, grid, gam, params.x_switch, params.delta_pol)

    dn0 = -_g.divergence_r(J + eps * gam * nv[:2], grid) / (2 * gam)

    # Phi[i, j] for the planar column index j
    nn = nv / n0
    Phi = np.empty((3, 2) + n0.shape)
    for i in range(3):
        for j in range(2):
            Phi[i, j] = t["cx"] * nn[i] * nn[j] + t["kappa"] * t["W"][j, i]
            if i == j:
                Phi[i, j] += t["wx"]
    flux = np.stack([nv[i] * J / n0 - eps * gam * n0 * Phi[i] for i in range(3)])
    dnv = -np.stack([_g.divergence_r(flux[i], grid) for i in range(3)]) / (2 * gam)
    gn0 = _g.gradient_r(n0, grid)
    dnv[:2] -= 0.5 * eps * gn0
    dnv -= wedge(nv, J3) / n0
    if eps:
        nhat = nv / np.maximum(t["nmag"], params.x_switch * n0)
        dnhat = _g.gradient_components(nhat, grid)  # dnhat[j, k] = d_j nhat_k
        div_nhat = dnhat[0, 0] + dnhat[1, 1]
        adv = nhat[0] * dnhat[0] + nhat[1] * dnhat[1]
        dnv -= 0.5 * eps * n0 * (2 * gam * t["kappa"]) * (div_nhat * nhat - adv)

    dJ = -gn0 / (2 * gam) - _tensor_div(J, (J + eps * gam * nv[:2]) / n0, grid) / (2 * gam)
    dJ -= n0 * _g.gradient_r(V, grid)
    return HydroState(dn0, dnv, dJ)


def rhs_qhe2(state, params, grid):
    """Second quantum hydrodynamic model (accurate to second order in eps)."""
    grid = _pos(grid)
    n0, nv, J, J3 = _hydro_common(state, params, grid)
    eps, gam = params.epsilon, params.gamma
    V = _potential(params, grid)
    if eps:
        V = V + bohm_potential(n0, eps, grid)
    dn0 = -_g.divergence_r(J + eps * gam * nv[:2], grid) / (2 * gam)
    dnv = -_tensor_div(nv, J / n0, grid) / (2 * gam) - wedge(nv, J3) / n0
    dJ = -_tensor_div(J, (J + eps * gam * nv[:2]) / n0, grid) / (2 * gam)
    dJ -= _g.gradient_r(n0, grid) / (2 * gam)
    dJ -= n0 * _g.gradient_r(V, grid)
    return HydroState(dn0, dnv, dJ)


RHS = {"qde1": rhs_qde1, "qde2": rhs_qde2, "qhe1": rhs_qhe1, "qhe2": rhs_qhe2}


def rhs(model, state, params, grid):
    try:
        fn = RHS[model]
    except KeyError:
        raise ValueError(f"unknown fluid model {model!r}") from None
    return fn(state, params, grid)


# ---------------------------------------------------------------------------
# time stepping


def step(model, state, params, grid, dt, scheme="rk4"):
    """One explicit step; raises :class:`StepRejected` on invariant violations."""
    f = lambda s: rhs(model, s, params, grid)
    if dt == 0:
        return state.copy()
    try:
        if scheme == "rk4":
            k1 = f(state)
            k2 = f(state + (0.5 * dt) * k1)
            k3 = f(state + (0.5 * dt) * k2)
            k4 = f(state + dt * k3)
            new = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        elif scheme == "ssprk3":
            u1 = state + dt * f(state)
            u2 = 0.75 * state + 0.25 * (u1 + dt * f(u1))
            new = (1 / 3) * state + (2 / 3) * (u2 + dt * f(u2))
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
    except (NonPositiveDensity, PolarizationOverflow, FloatingPointError) as exc:
        raise StepRejected(str(exc)) from exc
    check_state(new, params)
    return new


def check_state(state, params):
    """Raise :class:`StepRejected` unless the state satisfies the model invariants."""
    arrs = state.arrays()
    if not all(np.all(np.isfinite(a)) for a in arrs):
        raise StepRejected("non-finite values")
    n0 = state.n0
    if isinstance(state, DiffusiveState):
        mag = np.abs(state.nsigma)
    else:
        mag = np.sqrt(np.sum(state.nvec ** 2, axis=0))
    if np.any(n0 <= 0):
        raise StepRejected("density became non-positive")
    if np.any(mag >= (1 - params.delta_pol) * n0):
        raise StepRejected("polarization reached the density")


def cfl_dt(model, state, params, grid):
    """Stable explicit step estimate.

    The largest wavenumber magnitude on the 2D spectral grid is
    ``K = sqrt(2) pi / dr`` (the diagonal corner).  Diffusive models use
    ``C_d pi^2 / lambda`` with ``lambda`` the largest decay rate of the
    linearised operator, ``D K^2 + eps^2 K^4 / (24 gamma)`` plus potential
    terms; without potential this is ``C_d dr^2 / (2 D)``.  Hydrodynamic
    models use ``C_h dr / c`` with
    ``c = max|u| / (2 gamma) + eps/2 + sqrt(1/(4 gamma^2) + eps^2 K^2 / (24 gamma))``.
    """
    grid = _pos(grid)
    eps, gam = params.epsilon, params.gamma
    K = np.sqrt(2.0) * np.pi / grid.dr
    V = _potential(params, grid)
    gV = np.sqrt(np.sum(_g.gradient_r(V, grid) ** 2, axis=0)).max()
    if model in ("qde1", "qde2"):
        d00, d0s, _, dss = diffusion_coefficients(params)
        D = max(abs(d00), dss) + abs(d0s) + eps * params.gamma_hat / (8 * gam ** 2)
        lam = D * K ** 2 + gV * K / gam + gV ** 2
        lam += np.abs(_g.laplacian_r(V, grid)).max() / gam
        if model == "qde2":
            lam += eps ** 2 * K ** 4 / (24 * gam)
        return C_DIFFUSIVE * np.pi ** 2 / lam
    u = np.sqrt(np.sum((state.J / state.n0) ** 2, axis=0)).max()
    c = u / (2 * gam) + 0.5 * eps + np.sqrt(1 / (4 * gam ** 2) + eps ** 2 * K ** 2 / (24 * gam))
    return C_HYDRO * grid.dr / c


def diagnostics(state, grid, t=0.0):
    """Conserved totals, extrema and L2 norms of a state."""
    grid = _pos(grid)
    integ = lambda f: float(_g.integrate_r(f, grid))
    l2 = lambda f: float(np.sqrt(_g.integrate_r(f * f, grid)))
    rec = {"t": float(t), "mass": integ(state.n0), "min_n0": float(state.n0.min()), "l2_n0": l2(state.n0)}
    if isinstance(state, DiffusiveState):
        rec["spin"] = integ(state.nsigma)
        rec["max_pol"] = float(np.max(np.abs(state.nsigma) / state.n0))
        rec["l2_nsigma"] = l2(state.nsigma)
    else:
        for k in range(3):
            rec[f"spin{k + 1}"] = integ(state.nvec[k])
        for k in range(2):
            rec[f"momentum{k + 1}"] = integ(state.J[k])
        rec["max_pol"] = float(np.max(np.sqrt(np.sum(state.nvec ** 2, axis=0)) / state.n0))
        rec["l2_nvec"] = l2(np.sqrt(np.sum(state.nvec ** 2, axis=0)))
        rec["l2_J"] = l2(np.sqrt(np.sum(state.J ** 2, axis=0)))
    return rec


@dataclass
class Trajectory:
    times: list
    states: list
    records: list
    rejected_steps: int = 0
    steps: int = 0


def integrate(model, state, params, grid, t_end, dt=None, scheme="rk4", output_every=None):
    """Integrate ``model`` from ``t = 0`` to ``t_end``.

    ``dt`` defaults to :func:`cfl_dt` of the initial state.  The final step
    is shortened to land on ``t_end``.  After a rejected step the step is
    halved, at most ``MAX_RETRIES`` times in a row, then
    :class:`DtUnderflow` is raised.  Snapshots are kept every
    ``output_every`` accepted steps (and always at the end).
    """
    if dt is None:
        dt = cfl_dt(model, state, params, grid)
    check_state(state, params)
    t = 0.0
    cur = state.copy()
    traj = Trajectory([0.0], [cur.copy()], [diagnostics(cur, grid, 0.0)])
    n_acc = 0
    base_dt = dt
    while t < t_end * (1 - 1e-14):
        h = min(base_dt, t_end - t)
        for attempt in range(MAX_RETRIES + 1):
            try:
                new = step(model, cur, params, grid, h, scheme)
                break
            except StepRejected:
                traj.rejected_steps += 1
                h *= 0.5
        else:
            raise DtUnderflow(f"step rejected {MAX_RETRIES + 1} times at t = {t:.6g}")
        cur = new
        t += h
        n_acc += 1
        traj.steps = n_acc
        last = t >= t_end * (1 - 1e-14)
        if last or (output_every and n_acc % output_every == 0):
            traj.times.append(t)
            traj.states.append(cur.copy())
            traj.records.append(diagnostics(cur, grid, t))
    return traj


def with_fields(state, **kw):
    return replace(state, **kw)
