"""Brute-force references for the expansion formulas.

``quantum_exp_ode`` integrates the defining equation of the quantum
exponential, ``dg/dbeta = ((a + eps b) #_eps g + g #_eps (a + eps b)) / 2``
with ``g(0) = s0``, with the Moyal product truncated at a fixed order.
The pointwise matrix functions serve symbols that do not depend on r.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import OdeInstability, TailMass, UnsupportedOrder
from .grid import PhaseSpaceGrid, integrate_p
from .moyal import PauliJet
from .pauli import PauliSymbol, compose, decompose, sym_moyal_pauli

ODE_BLOWUP = 1e12


@dataclass(frozen=True)
class OracleConfig:
    """Settings of the quantum-exponential ODE.

    ``beta_steps`` fixed RK4 steps on ``[0, beta]``; at least 64 are
    recommended for order checks.
    """

    grid: PhaseSpaceGrid
    moyal_truncation_order: int = 2
    beta_steps: int = 128
    beta: float = 1.0

    def __post_init__(self):
        if self.moyal_truncation_order not in (0, 1, 2):
            raise UnsupportedOrder("Moyal truncation order must be 0, 1 or 2")
        if self.beta_steps < 1:
            raise ValueError("beta_steps must be positive")


def quantum_exp_ode(h, eps, cfg):
    """``g_eps(beta)`` for the symbol ``h`` (``= a + eps b``) by RK4 in beta.

    Parameters
    ----------
    h : PauliSymbol
    eps : float
    cfg : OracleConfig

    Returns
    -------
    PauliSymbol
    """
    grid = cfg.grid
    K = cfg.moyal_truncation_order if eps != 0 else 0
    h_jet = PauliJet(h, grid, order=K) if K > 0 else None
    weights = [eps ** k for k in range(K + 1)]

    def rhs(g):
        out = sym_moyal_pauli(0, h, g)
        if K > 0:
            g_jet = PauliJet(g, grid, order=K)
            for k in range(1, K + 1):
                out = out + weights[k] * sym_moyal_pauli(k, h, g, jets=(h_jet, g_jet))
        return out

    g = PauliSymbol.identity(h.shape)
    dt = cfg.beta / cfg.beta_steps
    for _ in range(cfg.beta_steps):
        k1 = rhs(g)
        k2 = rhs(g + (0.5 * dt) * k1)
        k3 = rhs(g + (0.5 * dt) * k2)
        k4 = rhs(g + dt * k3)
        g = g + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(g.s0)) or g.sup_norm() > ODE_BLOWUP:
            raise OdeInstability("quantum-exponential ODE left the admissible range")
    return g


def matrix_exp_pointwise(m):
    """``exp(M)`` for hermitian 2x2 matrices via the closed Pauli form.

    Parameters
    ----------
    m : array_like, shape (..., 2, 2)
    """
    c = decompose(m)
    a0, avec = c[0], c[1:]
    norm = np.sqrt(np.sum(avec ** 2, axis=0))
    safe = np.where(norm > 0, norm, 1.0)
    s = np.where(norm > 0, np.sinh(norm) / safe, 1.0)
    e = np.exp(a0)
    return compose(e * np.cosh(norm), e * s * avec)


def matrix_exp_frechet(m, d):
    """Directional derivative ``d/ds exp(M + s D)`` at ``s = 0``.

    Uses the block-triangular method of :func:`scipy.linalg.expm_frechet`
    one 2x2 pair at a time.
    """
    m = np.asarray(m, dtype=complex)
    d = np.asarray(d, dtype=complex)
    flat_m = m.reshape(-1, 2, 2)
    flat_d = np.broadcast_to(d, m.shape).reshape(-1, 2, 2)
    out = np.empty_like(flat_m)
    for i in range(flat_m.shape[0]):
        out[i] = linalg.expm_frechet(flat_m[i], flat_d[i], compute_expm=False)
    return out.reshape(m.shape)


def _check_tail(f, grid, tol):
    f = np.asarray(f)
    edge = max(
        np.max(np.abs(f[..., 0, :])),
        np.max(np.abs(f[..., -1, :])),
        np.max(np.abs(f[..., :, 0])),
        np.max(np.abs(f[..., :, -1])),
    )
    scale = max(1.0, float(np.max(np.abs(f))))
    if edge > tol * scale:
        raise TailMass(f"field is {edge:.3e} at the momentum boundary (tolerance {tol:g})")


def moment(field, grid, weight="1", tail_tol=1e-9):
    """Momentum moment of a phase-space field, one value per position node.

    Parameters
    ----------
    field : ndarray
        Scalar field ``(..., n_p, n_p)``, or for ``weight="phat"`` a vector
        field ``(3, ..., n_p, n_p)`` projected on ``p/|p|``.
    weight : {"1", "p1", "p2", "pp", "phat"}
        ``"pp"`` returns the ``(2, 2, ...)`` second-moment tensor.
    """
    p1, p2 = grid.momentum_2d()
    _check_tail(field, grid, tail_tol)
    if weight == "1":
        return integrate_p(field, grid)
    if weight == "p1":
        return integrate_p(field * p1, grid)
    if weight == "p2":
        return integrate_p(field * p2, grid)
    if weight == "pp":
        m11 = integrate_p(field * p1 * p1, grid)
        m12 = integrate_p(field * p1 * p2, grid)
        m22 = integrate_p(field * p2 * p2, grid)
        return np.array([[m11, m12], [m12, m22]])
    if weight == "phat":
        rho = np.hypot(p1, p2)
        return integrate_p((field[0] * p1 + field[1] * p2) / rho, grid)
    raise ValueError(f"unknown weight {weight!r}")
