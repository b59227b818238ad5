"""Entropy-minimising closures: quantum-exponential expansions and equilibria.

All equilibria are built on the momentum quadrature of a
:class:`~graphene_moments.grid.PhaseSpaceGrid`.  By default the two
Gaussian constants that enter them, ``<|p| G>`` (continuum value
``sqrt(pi/2)``) and ``<|p|^2 G> - <|p| G>^2`` (continuum ``2 - pi/2``), are
taken from the same quadrature, so the moment constraints hold to
round-off instead of to the quadrature error of the ``|p|`` cone at the
origin.  ``ModelParams(constants="continuum")`` selects the exact values.
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from . import grid as _g
from .errors import (
    DomainError,
    ExpOverflow,
    NewtonDivergence,
    NonPositiveDensity,
    NonPositiveEpsilon,
    NotDecoupled,
    PolarizationOverflow,
)
from .moyal import PauliJet, ScalarJet
from .pauli import PauliSymbol, dot, wedge

SQRT_HALF_PI = np.sqrt(np.pi / 2)
GAMMA_ANALYTIC = (np.log(2.0) - np.euler_gamma) / (4 * np.pi)
EXP_LIMIT = 700.0


def gamma_constant():
    """``(1/2pi) int_0^inf exp(-rho^2/2) rho log(rho) drho`` by adaptive quadrature."""
    f = lambda r: np.exp(-0.5 * r * r) * r * np.log(r) if r > 0 else 0.0
    # split at rho = 1 where the integrand changes sign
    i1, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
    i2, _ = integrate.quad(f, 1.0, np.inf, epsabs=1e-15, epsrel=1e-13, limit=200)
    return (i1 + i2) / (2 * np.pi)


# ---------------------------------------------------------------------------
# parameters


@dataclass
class ModelParams:
    """Scaled model parameters.

    Parameters
    ----------
    epsilon : float
        Semiclassical parameter.  Zero is accepted by the fluid models
        (classical limit) but rejected wherever the potential operator
        or a multiplier solve needs ``1/epsilon``.
    gamma : float
        Scaled Fermi speed divided by ``epsilon``.
    tau : float
        Diffusive or hydrodynamic relaxation parameter.
    potential : ndarray or None
        External potential on the position grid; ``None`` means zero.
    constants : {"grid", "continuum"}
        Source of the Gaussian constants used inside the equilibria.
    """

    epsilon: float
    gamma: float = 1.0
    tau: float = 1.0
    potential: Optional[np.ndarray] = None
    x_switch: float = 1e-3
    delta_pol: float = 1e-6
    constants: str = "grid"
    newton_tol: float = 1e-12
    newton_maxiter: int = 50
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise NonPositiveEpsilon(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not self.tau > 0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        if self.constants not in ("grid", "continuum"):
            raise ValueError("constants must be 'grid' or 'continuum'")

    @property
    def gamma_hat(self):
        return self.gamma * SQRT_HALF_PI

    @property
    def Gamma(self):
        return GAMMA_ANALYTIC

    @property
    def c(self):
        """Scaled Fermi speed ``c = epsilon * gamma``."""
        return self.epsilon * self.gamma

    def potential_on(self, n):
        if self.potential is None:
            return np.zeros((n, n))
        v = np.asarray(self.potential, dtype=float)
        if v.shape != (n, n):
            raise ValueError(f"potential shape {v.shape} does not match grid ({n}, {n})")
        return v

    @classmethod
    def from_physical(cls, m, v_F, T, tau_c, r_hat, hbar=1.054571817e-34,
                      k_B=1.380649e-23, scaling="diffusive", **kw):
        """Scaled parameters from physical inputs.

        ``p_hat = sqrt(m k_B T)``, ``epsilon = hbar / (r_hat p_hat)`` and
        ``c = sqrt(m v_F^2 / (k_B T))``; ``gamma = c / epsilon``.  The
        relaxation parameter is ``2 p_hat v_F tau_c / hbar`` in the
        diffusive scaling and ``tau_c / t_hat`` with
        ``1/t_hat = 2 v_F p_hat / hbar`` in the hydrodynamic one, which is
        the same number.
        """
        p_hat = np.sqrt(m * k_B * T)
        eps = hbar / (r_hat * p_hat)
        c = np.sqrt(m * v_F ** 2 / (k_B * T))
        if scaling == "diffusive":
            tau = 2 * p_hat * v_F * tau_c / hbar
        elif scaling == "hydrodynamic":
            t_hat = hbar / (2 * v_F * p_hat)
            tau = tau_c / t_hat
        else:
            raise ValueError(f"unknown scaling {scaling!r}")
        return cls(epsilon=eps, gamma=c / eps, tau=tau, **kw)


@dataclass
class EquilibriumDistribution:
    g: PauliSymbol
    order: int
    model_tag: str


@dataclass(frozen=True)
class GaussianConstants:
    """Quadrature moments of ``exp(-|p|^2/2)`` on a momentum grid."""

    q0: float
    q1: float
    q2: float
    c: float
    k: float


def gaussian_constants(grid, kind="grid"):
    """``q_j = <|p|^j exp(-|p|^2/2)>`` with ``c = q1/q0`` and ``k = q2/q0 - c^2``.

    With ``kind="continuum"`` the exact values ``2pi``, ``2pi sqrt(pi/2)``,
    ``4pi``, ``sqrt(pi/2)`` and ``2 - pi/2`` are returned.
    """
    if kind == "continuum":
        return GaussianConstants(2 * np.pi, 2 * np.pi * SQRT_HALF_PI, 4 * np.pi,
                                 SQRT_HALF_PI, 2 - np.pi / 2)
    p1, p2 = grid.momentum_2d()
    rho2 = p1 * p1 + p2 * p2
    e = np.exp(-0.5 * rho2)
    area = grid.dp * grid.dp
    q0 = float(np.sum(e) * area)
    q1 = float(np.sum(np.sqrt(rho2) * e) * area)
    q2 = float(np.sum(rho2 * e) * area)
    c = q1 / q0
    return GaussianConstants(q0, q1, q2, c, q2 / q0 - c * c)


def _constants(params, grid):
    return gaussian_constants(grid, params.constants)


# ---------------------------------------------------------------------------
# regular special functions


def sinhc(x):
    """``sinh(x)/x`` with the removable singularity filled."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 0.5, x)
    return np.where(small, 1.0 + x * x / 6.0, np.sinh(xs) / xs)


def _f1(x):
    """``(cosh x - sinh(x)/x) / x^2``, regular at 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.1
    xs = np.where(small, 0.5, x)
    x2 = x * x
    series = 1 / 3 + x2 * (1 / 30 + x2 * (1 / 840 + x2 * (1 / 45360 + x2 / 3991680)))
    return np.where(small, series, (np.cosh(xs) - np.sinh(xs) / xs) / (xs * xs))


def _half_versinc(x):
    """``(cosh x - 1) / x^2``, regular at 0."""
    return 0.5 * sinhc(0.5 * np.asarray(x, dtype=float)) ** 2


def omega_regularized(n0, nmag, x_switch=1e-3):
    """``omega = 1 / artanh(|n|/n0)``, the inverse of ``log sqrt((n0+|n|)/(n0-|n|))``.

    Below ``x = |n|/n0 <= x_switch`` the value comes from the series of
    :func:`omega_times_x`, so that ``omega * x`` stays accurate.  ``x = 0``
    returns ``inf``.
    """
    n0 = np.asarray(n0, dtype=float)
    x = _polarization_ratio(n0, nmag)
    with np.errstate(divide="ignore"):
        return omega_times_x(x, x_switch) / x


def omega_times_x(x, x_switch=1e-3):
    """Regular product ``omega(x) * x = x / artanh(x)`` (tends to 1 at 0)."""
    x = np.asarray(x, dtype=float)
    small = x <= x_switch
    xs = np.where(small, 0.5, x)
    x2 = x * x
    series = 1.0 / (1.0 + x2 * (1 / 3 + x2 * (1 / 5 + x2 / 7)))
    return np.where(small, series, xs / np.arctanh(xs))


def _polarization_ratio(n0, nmag):
    n0 = np.asarray(n0, dtype=float)
    nmag = np.asarray(nmag, dtype=float)
    if np.any(nmag < 0):
        raise DomainError("polarization magnitude must be non-negative")
    if np.any(nmag >= n0):
        raise DomainError("polarization magnitude must be below the density")
    return nmag / n0


# ---------------------------------------------------------------------------
# quantum-exponential expansions


def semigroup_apply(a, beta, x0):
    """``S_a(beta) X0`` for the linear system ``X' = (a0 + a.s) X``.

    Parameters
    ----------
    a : array_like, shape (4, ...)
        Pauli components ``(a0, a1, a2, a3)``.
    beta : float
    x0 : array_like, shape (4, ...)

    Returns
    -------
    ndarray, shape (4, ...)
    """
    a = np.asarray(a, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    avec = a[1:]
    m = np.sqrt(np.sum(avec * avec, axis=0))
    x = beta * m
    e = np.exp(beta * a[0])
    ch = np.cosh(x)
    sa = beta * sinhc(x)  # sinh(x) alpha = sa * avec
    ad = dot(avec, x0[1:])
    out = np.empty(np.broadcast(a, x0).shape)
    out[0] = e * (ch * x0[0] + sa * ad)
    out[1:] = e * (sa * avec * x0[0] + beta ** 2 * _half_versinc(x) * avec * ad + x0[1:])
    return out


def _check_overflow(a0, amag, beta):
    top = float(np.max(beta * a0 + abs(beta) * amag)) if np.size(a0) else 0.0
    if top > EXP_LIMIT:
        raise ExpOverflow(f"exponent {top:.1f} exceeds {EXP_LIMIT}")


def gexp_leading(a, beta):
    """Leading term ``exp(beta a)`` of the quantum exponential, pointwise.

    Equals ``e^{beta a0} (cosh(beta|a|) s0 + sinh(beta|a|) a/|a| . s)``; the
    vector part is evaluated as ``beta sinhc(beta|a|) a`` which is regular
    at ``a = 0``.
    """
    m = np.sqrt(np.sum(a.svec ** 2, axis=0))
    _check_overflow(a.s0, m, beta)
    x = beta * m
    e = np.exp(beta * a.s0)
    return PauliSymbol(e * np.cosh(x), e * beta * sinhc(x) * a.svec)


def _brackets(jet, s, t):
    """Poisson bracket ``{a_s, a_t}`` from a :class:`PauliJet`."""
    f, g = jet.comp[s], jet.comp[t]
    return (f.r[0] * g.p[0] - f.p[0] * g.r[0]) + (f.r[1] * g.p[1] - f.p[1] * g.r[1])


def gexp_first_order(a, b, beta, grid, jet=None):
    """First-order term ``g^(1)(beta)`` of ``Exp_eps(beta (a + eps b))``.

    The brackets enter through ``P_j = eta_jst {a_s, a_t}`` and
    ``{a0, a}``; all coefficients are entire functions of ``beta |a|``, so
    the expression stays finite as the vector part of ``a`` vanishes.

    Parameters
    ----------
    a, b : PauliSymbol
    beta : float
    grid : PhaseSpaceGrid
    jet : PauliJet, optional
        Precomputed first-order jet of ``a``.
    """
    if jet is None:
        jet = PauliJet(a, grid, order=1)
    avec, bvec = a.svec, b.svec
    m = np.sqrt(np.sum(avec ** 2, axis=0))
    _check_overflow(a.s0, m, beta)
    x = beta * m
    e = np.exp(beta * a.s0)
    ch = np.cosh(x)
    sc = sinhc(x)
    f1 = _f1(x)
    P = np.stack([2 * _brackets(jet, 2, 3), 2 * _brackets(jet, 3, 1), 2 * _brackets(jet, 1, 2)])
    a0a = np.stack([_brackets(jet, 0, s) for s in (1, 2, 3)])
    ab = dot(avec, bvec)
    aP = dot(avec, P)

    g0 = beta * e * (ch * b.s0 + beta * sc * ab) - 0.25 * beta ** 3 * e * f1 * aP
    gv = beta * e * (beta * sc * b.s0 * avec + beta ** 2 * f1 * ab * avec + sc * bvec)
    gv = gv - 0.25 * beta ** 2 * e * sc * P + 0.5 * beta ** 3 * e * f1 * wedge(a0a, avec)
    return PauliSymbol(g0, gv)


def scalar_exp2_from_derivatives(a, beta, ar, ap, arr, arp, app):
    """Second-order term of ``Exp_eps(beta a)`` for a scalar symbol ``a``.

    Arguments are the symbol and its derivatives: ``ar[j]``, ``ap[j]``
    (first), ``arr[j][s]``, ``arp[j][s] = d_{r_j} d_{p_s} a`` and
    ``app[j][s]`` (second).  The result is
    ``-(e^{beta a}/8) (beta^2 D1/2 + beta^3 D2/3)`` with
    ``D1 = 2 sum(a_rr a_pp - a_rp a_pr)`` and
    ``D2 = sum(a_rr a_p a_p - 2 a_rp a_p a_r + a_pp a_r a_r)``.
    """
    d1 = 0.0
    d2 = 0.0
    for j in range(2):
        for s in range(2):
            d1 = d1 + arr[j][s] * app[j][s] - arp[j][s] * arp[s][j]
            d2 = d2 + (arr[j][s] * ap[j] * ap[s] - 2.0 * arp[j][s] * ap[j] * ar[s]
                       + app[j][s] * ar[j] * ar[s])
    d1 = 2.0 * d1
    return -0.125 * np.exp(beta * a) * (beta ** 2 * d1 / 2.0 + beta ** 3 * d2 / 3.0)


def scalar_exp2(a, beta, grid):
    """Second-order quantum-exponential term of a smooth, p-periodic scalar symbol."""
    j = ScalarJet(a, grid, order=2)
    return scalar_exp2_from_derivatives(np.asarray(a), beta, j.r, j.p, j.rr, j.rp, j.pp)


def exp2_quadratic(A, beta, grid, drift=None):
    """Second-order term for ``a = -(|p - nu|^2/2 + A(r))``.

    The momentum derivatives are analytic, so the symbol need not be
    periodic in p.  ``drift`` is the constant-in-p vector ``nu(r)`` (two
    position fields) or ``None`` for zero.
    """
    A = np.asarray(A, dtype=float)
    p1, p2 = grid.p_mesh()
    if drift is None:
        q = [p1, p2]
        nu_r = None
    else:
        nu = np.asarray(drift, dtype=float)
        q = [p1 - grid.full(nu[0]), p2 - grid.full(nu[1])]
        nu_r = [_g.gradient_r(nu[k], grid.position) for k in range(2)]
    gA = _g.gradient_r(A, grid.position)
    hA = _g.hessian_r(A, grid.position)
    H = [[hA[0], hA[1]], [hA[1], hA[2]]]
    a = -(0.5 * (q[0] ** 2 + q[1] ** 2) + grid.full(A))
    ap = [-q[0], -q[1]]
    app = [[-np.ones((1, 1, 1, 1)), np.zeros((1, 1, 1, 1))],
           [np.zeros((1, 1, 1, 1)), -np.ones((1, 1, 1, 1))]]
    if nu_r is None:
        ar = [-grid.full(gA[j]) for j in range(2)]
        arr = [[-grid.full(H[j][s]) for s in range(2)] for j in range(2)]
        arp = [[np.zeros((1, 1, 1, 1))] * 2 for _ in range(2)]
    else:
        # a_{r_j} = q_k d_j nu_k - d_j A ; a_{r_j p_s} = d_j nu_s
        ar = [q[0] * grid.full(nu_r[0][j]) + q[1] * grid.full(nu_r[1][j]) - grid.full(gA[j])
              for j in range(2)]
        arp = [[grid.full(nu_r[s][j]) for s in range(2)] for j in range(2)]
        arr = []
        hn = [_g.hessian_r(nu[k], grid.position) for k in range(2)]
        for j in range(2):
            row = []
            for s in range(2):
                idx = {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 2}[(j, s)]
                val = (q[0] * grid.full(hn[0][idx]) + q[1] * grid.full(hn[1][idx])
                       - grid.full(nu_r[0][j] * nu_r[0][s] + nu_r[1][j] * nu_r[1][s])
                       - grid.full(H[j][s]))
                row.append(val)
            arr.append(row)
    return scalar_exp2_from_derivatives(a, beta, ar, ap, arr, arp, app)


def gexp_sms(a0, bvec, beta, eps, grid=None, exp2=None, tol=1e-12):
    """Expansion through ``eps^2`` of ``Exp_eps(beta (a + eps b))`` for decoupled symbols.

    ``a`` is scalar and ``b`` purely vectorial.  The result is
    ``e^{beta a}(1 + eps^2 beta^2 |b|^2 / 2) + eps^2 Exp(beta a)^(2)`` in the
    scalar part and ``eps beta e^{beta a} b`` in the vector part.

    Parameters
    ----------
    a0 : ndarray or PauliSymbol
        Scalar symbol.  A :class:`PauliSymbol` is accepted and must have a
        vanishing vector part.
    bvec : ndarray, shape (3, ...) or PauliSymbol
        Vector symbol; a :class:`PauliSymbol` must have zero scalar part.
    exp2 : ndarray, optional
        Precomputed ``Exp(beta a)^(2)``.  Otherwise it is obtained from
        spectral derivatives of ``a0`` (valid for p-periodic symbols).
    """
    if isinstance(a0, PauliSymbol):
        if np.max(np.abs(a0.svec)) > tol:
            raise NotDecoupled("a has a nonzero vector part")
        a0 = a0.s0
    if isinstance(bvec, PauliSymbol):
        if np.max(np.abs(bvec.s0)) > tol:
            raise NotDecoupled("b has a nonzero scalar part")
        bvec = bvec.svec
    a0 = np.asarray(a0, dtype=float)
    bvec = np.asarray(bvec, dtype=float)
    _check_overflow(a0, np.zeros(()), beta)
    e = np.exp(beta * a0)
    if exp2 is None:
        exp2 = scalar_exp2(a0, beta, grid) if eps != 0 else 0.0
    b2 = np.sum(bvec ** 2, axis=0)
    s0 = e * (1.0 + 0.5 * eps ** 2 * beta ** 2 * b2) + eps ** 2 * exp2
    return PauliSymbol(s0, eps * beta * e * bvec)


# ---------------------------------------------------------------------------
# scalar quantum Maxwellians


def _log_density(n):
    n = np.asarray(n, dtype=float)
    if np.any(~(n > 0)):
        raise NonPositiveDensity("density must be positive everywhere")
    return np.log(n)


def scalar_quantum_maxwellian(n, eps, grid, drift=None):
    """``(n/2pi) e^{-|q|^2/2} [1 + (eps^2/24)(Lap log n - q^T Hess(log n) q)]``.

    ``q = p`` without drift; with ``drift = u`` (two position fields),
    ``q = p - u`` which gives the flow-carrying Maxwellian with
    ``<g> = n`` and ``<p g> = n u``.
    """
    ln = _log_density(n)
    h11, h12, h22 = _g.hessian_r(ln, grid.position)
    p1, p2 = grid.p_mesh()
    if drift is not None:
        p1 = p1 - grid.full(drift[0])
        p2 = p2 - grid.full(drift[1])
    F = grid.full
    quad = F(h11) * p1 * p1 + 2 * F(h12) * p1 * p2 + F(h22) * p2 * p2
    corr = F(h11 + h22) - quad
    gauss = np.exp(-0.5 * (p1 * p1 + p2 * p2)) / (2 * np.pi)
    return F(np.asarray(n, dtype=float)) * gauss * (1.0 + eps ** 2 / 24.0 * corr)


def _unit_p(grid):
    p1, p2 = grid.p_mesh()
    rho = grid.p_abs
    return p1 / rho, p2 / rho, rho


def _gauss(grid):
    return np.exp(-0.5 * grid.p_abs ** 2) / (2 * np.pi)


def _check_density(n0):
    if np.any(~(np.asarray(n0) > 0)):
        raise NonPositiveDensity("n0 must be positive everywhere")


# ---------------------------------------------------------------------------
# diffusive equilibria


def qde1_force(n0, nsigma, grid, delta_pol=1e-6):
    """In-plane vector ``F`` entering the first-order diffusive equilibrium."""
    n0 = np.asarray(n0, dtype=float)
    nsigma = np.asarray(nsigma, dtype=float)
    x = np.abs(nsigma) / n0
    if np.any(x >= 1 - delta_pol):
        raise PolarizationOverflow(f"|n_sigma|/n0 reaches {x.max():.6g}")
    pos = grid.position if hasattr(grid, "position") else grid
    g_abs = _g.gradient_r(np.abs(nsigma), pos)
    g_sum = _g.gradient_r(n0 + np.sqrt(n0 ** 2 - nsigma ** 2), pos)
    return -0.5 * (g_abs - np.arctanh(x) * g_sum)


def equilibrium_qde1(n0, nsigma, params, grid):
    """First-order diffusive equilibrium from ``(n0, n_sigma)``.

    Scalar part ``G{n0 + eps gamma (c - |p|) n_sigma}``; vector part
    ``G{n_sigma p/|p| + eps gamma (c - |p|) n0 p/|p| + eps F ^ p/|p|^2}``
    with ``G = e^{-|p|^2/2}/2pi`` and ``c`` the Gaussian ``|p|`` mean.
    """
    _check_density(n0)
    n0 = np.asarray(n0, dtype=float)
    nsigma = np.asarray(nsigma, dtype=float)
    eps, gam = params.epsilon, params.gamma
    c = _constants(params, grid).c
    F = qde1_force(n0, nsigma, grid, params.delta_pol)
    u1, u2, rho = _unit_p(grid)
    G = _gauss(grid)
    L = grid.full
    shift = eps * gam * (c - rho)
    g0 = G * (L(n0) + shift * L(nsigma))
    radial = G * (L(nsigma) + shift * L(n0))
    # F is in-plane and p in-plane: F ^ p is out of plane
    g3 = eps * G * (L(F[0]) * u2 - L(F[1]) * u1) / rho
    gv = np.stack([radial * u1, radial * u2, np.broadcast_to(g3, radial.shape)])
    return EquilibriumDistribution(PauliSymbol(g0, gv), 1, "qde1")


def equilibrium_qde2(n0, nsigma, params, grid):
    """Second-order diffusive equilibrium (strongly mixed state)."""
    _check_density(n0)
    n0 = np.asarray(n0, dtype=float)
    nsigma = np.asarray(nsigma, dtype=float)
    eps, gam = params.epsilon, params.gamma
    ratio = nsigma / n0
    if eps > 0 and np.max(np.abs(ratio)) > 10 * eps:
        warnings.warn("|n_sigma/n0| exceeds 10 epsilon; the second-order closure assumes O(epsilon)",
                      stacklevel=2)
    k = _constants(params, grid)
    m = n0 - 0.5 * n0 * (eps ** 2 * gam ** 2 * k.k + ratio ** 2)
    if np.any(m <= 0):
        raise NonPositiveDensity("shifted density for the scalar Maxwellian is not positive")
    u1, u2, rho = _unit_p(grid)
    G = _gauss(grid)
    L = grid.full
    bracket = eps * gam * (k.c - rho) + L(ratio)
    g0 = scalar_quantum_maxwellian(m, eps, grid) + 0.5 * L(n0) * G * bracket ** 2
    radial = L(n0) * G * bracket
    gv = np.stack([radial * u1, radial * u2, np.zeros_like(radial)])
    return EquilibriumDistribution(PauliSymbol(g0, gv), 2, "qde2")


def band_moments(sym, grid):
    """``(n0, n_sigma) = (<g0>, <p/|p| . g>)``."""
    u1, u2, _ = _unit_p(grid)
    n0 = _g.integrate_p(sym.s0, grid)
    ns = _g.integrate_p(sym.svec[0] * u1 + sym.svec[1] * u2, grid)
    return n0, ns


def solve_multipliers_diffusive(n_plus, n_minus, params, grid, picard_tol=1e-13, picard_maxiter=60):
    """Lagrange multipliers ``(A, B)`` of the second-order diffusive closure.

    The equilibrium is the ``eps^2`` expansion of the quantum exponential of
    ``-(|p|^2/2 + A) s0 - eps (gamma |p| + B) p/|p| . s``.  Its moments are
    local in ``(A, B)`` except for the second-order term, which involves
    derivatives of ``A``; that term is frozen in an outer fixed-point loop
    while a vectorised 2x2 Newton iteration solves each grid point.

    Returns
    -------
    A, B : ndarray
    info : dict
        Iteration counts and final residual.
    """
    n_plus = np.asarray(n_plus, dtype=float)
    n_minus = np.asarray(n_minus, dtype=float)
    if np.any(~(n_plus > 0)) or np.any(~(n_minus > 0)):
        raise NonPositiveDensity("band densities must be positive")
    eps, gam = params.epsilon, params.gamma
    if not eps > 0:
        raise NonPositiveEpsilon("the multiplier solve needs epsilon > 0")
    n0 = 0.5 * (n_plus + n_minus)
    ns = 0.5 * (n_plus - n_minus)
    k = _constants(params, grid)
    q0, q1, q2 = k.q0, k.q1, k.q2

    A = -np.log(n0 / (2 * np.pi))
    B = -ns / (eps * n0) - gam * SQRT_HALF_PI
    pos = grid.position
    newton_total = 0
    for outer in range(picard_maxiter):
        gA = _g.gradient_r(A, pos)
        lapA = _g.laplacian_r(A, pos)
        # <Exp^(2)> = e^{-A} e2 with derivatives of A frozen
        e2 = -0.125 * (lapA * q0 - (0.5 * lapA * q2 + np.sum(gA ** 2, axis=0) * q0) / 3.0)
        A_prev = A.copy()
        for it in range(params.newton_maxiter):
            y = np.exp(-A)
            s = gam * q1 + B * q0
            f1 = y * (q0 + 0.5 * eps ** 2 * (gam ** 2 * q2 + 2 * gam * B * q1 + B ** 2 * q0)
                      + eps ** 2 * e2) - n0
            f2 = -eps * y * s - ns
            res = max(np.max(np.abs(f1 / n0)), np.max(np.abs(f2 / n0)))
            if res < params.newton_tol:
                break
            j11 = -(f1 + n0)
            j12 = y * eps ** 2 * s
            j21 = -(f2 + ns)
            j22 = -eps * y * q0
            det = j11 * j22 - j12 * j21
            dA = (f1 * j22 - f2 * j12) / det
            dB = (j11 * f2 - j21 * f1) / det
            A = A - dA
            B = B - dB
            if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
                raise NewtonDivergence("non-finite multipliers during Newton iteration")
        else:
            raise NewtonDivergence(
                f"Newton did not converge in {params.newton_maxiter} iterations (residual {res:.3e})"
            )
        newton_total += it
        if np.max(np.abs(A - A_prev)) < picard_tol:
            break
    else:
        raise NewtonDivergence("fixed-point iteration on the nonlocal term did not converge")
    return A, B, {"picard_iterations": outer + 1, "newton_iterations": newton_total, "residual": res}


def equilibrium_from_multipliers(A, B, params, grid):
    """SMS equilibrium symbol built from diffusive multipliers ``(A, B)``."""
    eps, gam = params.epsilon, params.gamma
    u1, u2, rho = _unit_p(grid)
    a = -(0.5 * rho ** 2 + grid.full(A))
    radial = -(gam * rho + grid.full(B))
    bvec = np.stack([radial * u1, radial * u2, np.zeros_like(radial)])
    return gexp_sms(a, bvec, 1.0, eps, grid, exp2=exp2_quadratic(A, 1.0, grid))


def sms_identity_residual(A, B, n0, nsigma, params, grid):
    """``eps n0 (B + gamma c) + n_sigma`` with the closure's ``|p|`` constant ``c``."""
    c = _constants(params, grid).c
    return params.epsilon * n0 * (B + params.gamma * c) + nsigma


def hydro_moments_from_multipliers(A, nu, Bvec, params, grid):
    """Moments ``(n0, n, J)`` of the SMS hydrodynamic equilibrium.

    The symbol is ``a = -(|p - nu|^2/2 + A)``, ``b = -(B + gamma p)`` with
    ``nu`` an in-plane drift and ``B`` a 3-vector field.
    """
    eps, gam = params.epsilon, params.gamma
    nu = np.asarray(nu, dtype=float)
    Bvec = np.asarray(Bvec, dtype=float)
    p1, p2 = grid.p_mesh()
    L = grid.full
    q1 = p1 - L(nu[0])
    q2 = p2 - L(nu[1])
    a = -(0.5 * (q1 * q1 + q2 * q2) + L(A))
    shape = np.broadcast(a, p1).shape
    bvec = -np.stack([
        np.broadcast_to(L(Bvec[0]) + gam * p1, shape),
        np.broadcast_to(L(Bvec[1]) + gam * p2, shape),
        np.broadcast_to(L(Bvec[2]), shape),
    ])
    g = gexp_sms(a, bvec, 1.0, eps, grid, exp2=exp2_quadratic(A, 1.0, grid, drift=nu))
    n0 = _g.integrate_p(g.s0, grid)
    nvec = _g.integrate_p(g.svec, grid)
    J = np.stack([_g.integrate_p(p1 * g.s0, grid), _g.integrate_p(p2 * g.s0, grid)])
    return n0, nvec, J


# ---------------------------------------------------------------------------
# hydrodynamic equilibria


def _safe_direction(nvec, n0, x_switch):
    """``n/|n|`` with the magnitude floored at ``x_switch * n0``."""
    nmag = np.sqrt(np.sum(nvec ** 2, axis=0))
    return nvec / np.maximum(nmag, x_switch * n0), nmag


def spin_frame_terms(n0, nvec, grid, gamma, x_switch=1e-3, delta_pol=1e-6):
    """Pointwise ingredients of the first-order hydrodynamic closure.

    Returns a dict with ``x = |n|/n0``, ``wx = omega x``, the matrix
    ``M = omega x I + c(x) n n^T / n0^2`` (``c(x) = (1 - x^2 - omega x)/x^2``),
    the derivative cross products ``W[j] = (n/|n|) ^ d_j(n/|n|)`` and the
    coefficient ``kappa = omega (1 - x) / (2 gamma)``.
    """
    n0 = np.asarray(n0, dtype=float)
    nvec = np.asarray(nvec, dtype=float)
    nmag = np.sqrt(np.sum(nvec ** 2, axis=0))
    x = nmag / n0
    if np.any(x >= 1 - delta_pol):
        raise PolarizationOverflow(f"|n|/n0 reaches {x.max():.6g}")
    wx = omega_times_x(x, x_switch)
    small = x < 1e-2
    xs = np.where(small, 0.5, x)
    x2 = x * x
    # series of (1 - x^2 - x/artanh x)/x^2 about 0
    c_series = -2.0 / 3.0 + x2 * (4.0 / 45.0 + x2 * (44.0 / 945.0))
    cx = np.where(small, c_series, (1 - xs * xs - omega_times_x(xs, x_switch)) / (xs * xs))
    pos = grid.position if hasattr(grid, "position") else grid
    dn = _g.gradient_components(nvec, pos)  # dn[j, k] = d_j n_k
    denom = np.maximum(nmag, x_switch * n0) ** 2
    W = np.stack([wedge(nvec, dn[j]) / denom for j in range(2)])  # (2, 3, ...)
    with np.errstate(divide="ignore"):
        omega = np.where(x > 0, wx / np.where(x > 0, x, 1.0), np.inf)
    # omega (1 - x) with omega ~ 1/x below the floor
    kappa = wx / np.maximum(x, x_switch) * (1 - x) / (2 * gamma)
    return {"x": x, "wx": wx, "cx": cx, "W": W, "kappa": kappa, "omega": omega, "nmag": nmag}


def equilibrium_qhe1(n0, nvec, J, params, grid):
    """First-order hydrodynamic equilibrium.

    ``g0 = (n0/2pi) e^{-|q|^2/2}``, ``g = (n0/2pi) e^{-|q|^2/2} (n/n0 - eps gamma Z)``
    with ``q = p - J/n0`` and
    ``Z = M q + (omega/2gamma)(1 - |n|/n0) (n/|n|) ^ [(q . grad)(n/|n|)]``.
    """
    _check_density(n0)
    n0 = np.asarray(n0, dtype=float)
    nvec = np.asarray(nvec, dtype=float)
    J = np.asarray(J, dtype=float)
    eps, gam = params.epsilon, params.gamma
    t = spin_frame_terms(n0, nvec, grid, gam, params.x_switch, params.delta_pol)
    L = grid.full
    p1, p2 = grid.p_mesh()
    q1 = p1 - L(J[0] / n0)
    q2 = p2 - L(J[1] / n0)
    G = np.exp(-0.5 * (q1 * q1 + q2 * q2)) / (2 * np.pi)
    g0 = L(n0) * G
    ndn = [L(nvec[k] / n0) for k in range(3)]
    nq = ndn[0] * q1 + ndn[1] * q2
    Z = []
    for k in range(3):
        zk = L(t["wx"]) * (q1 if k == 0 else q2 if k == 1 else 0.0) + L(t["cx"]) * ndn[k] * nq
        zk = zk + L(t["kappa"]) * (q1 * L(t["W"][0, k]) + q2 * L(t["W"][1, k]))
        Z.append(zk)
    gv = np.stack([g0 * (ndn[k] - eps * gam * Z[k]) for k in range(3)])
    return EquilibriumDistribution(PauliSymbol(g0, gv), 1, "qhe1")


def equilibrium_qhe2(n0, nvec, J, params, grid):
    """Second-order hydrodynamic equilibrium (strongly mixed state).

    The flow-carrying scalar Maxwellian is the drifted form of
    :func:`scalar_quantum_maxwellian`.  Only the in-plane part of the spin
    vector enters its flow argument, since the flow vector is planar.
    """
    _check_density(n0)
    n0 = np.asarray(n0, dtype=float)
    nvec = np.asarray(nvec, dtype=float)
    J = np.asarray(J, dtype=float)
    eps, gam = params.epsilon, params.gamma
    s = np.sum(nvec ** 2, axis=0) / (2 * n0 ** 2) + eps ** 2 * gam ** 2
    m = n0 * (1 - s)
    if np.any(m <= 0):
        raise NonPositiveDensity("shifted density for the flow Maxwellian is not positive")
    Jp = J + eps * gam * nvec[:2] - s * J
    L = grid.full
    p1, p2 = grid.p_mesh()
    q1 = p1 - L(J[0] / n0)
    q2 = p2 - L(J[1] / n0)
    G = np.exp(-0.5 * (q1 * q1 + q2 * q2)) / (2 * np.pi)
    v = [L(nvec[k] / n0) - eps * gam * q for k, q in zip(range(3), (q1, q2, 0.0))]
    v2 = v[0] ** 2 + v[1] ** 2 + v[2] ** 2
    g0 = scalar_quantum_maxwellian(m, eps, grid, drift=Jp / m) + 0.5 * L(n0) * G * v2
    gv = np.stack([np.broadcast_to(L(n0) * G * vk, g0.shape) for vk in v])
    return EquilibriumDistribution(PauliSymbol(g0, gv), 2, "qhe2")


def hydro_moments(sym, grid):
    """``(n0, n, J) = (<g0>, <g>, <p g0>)``."""
    p1, p2 = grid.p_mesh()
    n0 = _g.integrate_p(sym.s0, grid)
    nvec = _g.integrate_p(sym.svec, grid)
    J = np.stack([_g.integrate_p(p1 * sym.s0, grid), _g.integrate_p(p2 * sym.s0, grid)])
    return n0, nvec, J
