"""Oracle and invariant checks behind the acceptance suite and ``graphene-moments verify``.

Every ``check_*`` function returns a :class:`CheckResult` carrying the
measured value, the threshold it is compared with and the runtime.
"""

import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import closure as _c
from . import driver as _d
from . import fluid as _f
from . import grid as _g
from . import kinetic as _k
from .grid import PhaseSpaceGrid, PositionGrid
from .oracle import OracleConfig, quantum_exp_ode
from .pauli import PauliSymbol

EPS_LADDER = (0.1, 0.05, 0.025, 0.0125)
EXPANSION_SEED = 1


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    value: object
    threshold: str
    runtime: float
    details: dict = field(default_factory=dict)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        if isinstance(self.value, str):
            val = self.value
        elif 1e-3 <= abs(self.value) < 1e4:
            val = f"{self.value:.3f}"
        else:
            val = f"{self.value:.3e}"
        return f"[{tag}] criterion {self.number}: {self.name}: {val} (required {self.threshold}; {self.runtime:.1f} s)"


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# ---------------------------------------------------------------------------
# helpers


def random_periodic_symbol(grid, rng, amp=0.5, modes=3):
    """Smooth random scalar field periodic in r and on the momentum box."""
    r1, r2 = grid.r_mesh()
    p1, p2 = grid.p_mesh()
    kp = 2 * np.pi / (2 * grid.p_max)
    kr = 2 * np.pi / grid.length
    f = 0.0
    for _ in range(modes):
        m = rng.integers(-1, 2, 4)
        f = f + amp * rng.normal() * np.cos(
            kr * (m[0] * r1 + m[1] * r2) + kp * (m[2] * p1 + m[3] * p2) + rng.uniform(0, 2 * np.pi)
        )
    return np.broadcast_to(f, grid.shape).copy()


def expansion_symbols(grid, seed=EXPANSION_SEED, sms=False):
    """Random ``(a, b)``; with ``sms`` a is scalar and b purely vectorial."""
    rng = np.random.default_rng(seed)
    if sms:
        a = PauliSymbol(random_periodic_symbol(grid, rng), np.zeros((3,) + grid.shape))
        b = PauliSymbol(np.zeros(grid.shape), np.stack([random_periodic_symbol(grid, rng) for _ in range(3)]))
    else:
        a = PauliSymbol.from_components([random_periodic_symbol(grid, rng) for _ in range(4)])
        b = PauliSymbol.from_components([random_periodic_symbol(grid, rng) for _ in range(4)])
    return a, b


def expansion_residual(eps, grid, seed=EXPANSION_SEED, sms=False, beta_steps=64):
    """Sup-norm distance between the ODE oracle and the truncated expansion."""
    a, b = expansion_symbols(grid, seed, sms)
    ref = quantum_exp_ode(a + eps * b, eps, OracleConfig(grid, 2, beta_steps))
    if sms:
        approx = _c.gexp_sms(a, b, 1.0, eps, grid)
    else:
        approx = _c.gexp_leading(a, 1.0) + eps * _c.gexp_first_order(a, b, 1.0, grid)
    return (ref - approx).sup_norm()


def _moment_grid():
    return PhaseSpaceGrid(16, 64, 2 * np.pi, 8.0)


def _density_fields(grid):
    r1, r2 = grid.position.mesh()
    return r1, r2, 1 + 0.3 * np.sin(r1) + 0.2 * np.cos(r2)


def sms_identity_error(eps, grid, params=None):
    """Max of ``eps n0 (B + gamma c) + n_sigma`` for SMS band densities."""
    params = params or _c.ModelParams(epsilon=eps)
    params = replace(params, epsilon=eps)
    r1, r2, n0 = _density_fields(grid)
    ns = 0.5 * eps * np.cos(r1) * n0
    A, B, _ = _c.solve_multipliers_diffusive(n0 + ns, n0 - ns, params, grid)
    return float(np.max(np.abs(_c.sms_identity_residual(A, B, n0, ns, params, grid))))


# ---------------------------------------------------------------------------
# criteria


def check_gamma_constant():
    val, rt = _timed(_c.gamma_constant)
    err = abs(val - _c.GAMMA_ANALYTIC)
    return CheckResult(1, "closure constant", err <= 1e-10 and rt < 1.0, err, "<= 1e-10 in < 1 s", rt,
                       {"value": val})


def _slope_check(number, name, sms, min_slope, budget):
    grid = PhaseSpaceGrid(16, 16, 2 * np.pi, 8.0)
    errs, rt = _timed(lambda: [expansion_residual(e, grid, sms=sms) for e in EPS_LADDER])
    slope = _d.fit_slope(EPS_LADDER, errs)
    return CheckResult(number, name, slope >= min_slope and rt < budget, slope,
                       f"slope >= {min_slope} in < {budget:.0f} s", rt, {"residuals": errs})


def check_expansion_order():
    return _slope_check(2, "first-order expansion slope", False, 1.9, 120.0)


def check_sms_order():
    return _slope_check(3, "SMS expansion slope", True, 2.7, 120.0)


def _parity_error(sym, grid):
    """Deviation from ``g0(-p) = g0(p)``, ``g(-p) = -g(p)``."""
    flip = lambda f: f[..., ::-1, ::-1]
    e0 = np.max(np.abs(sym.s0 - flip(sym.s0)))
    ev = np.max(np.abs(sym.svec + flip(sym.svec)))
    return float(max(e0, ev) / max(1.0, sym.sup_norm()))


def check_moment_constraints(eps=0.05):
    def work():
        grid = _moment_grid()
        p = _c.ModelParams(epsilon=eps)
        r1, r2, n0 = _density_fields(grid)
        out = {}
        ns1 = 0.3 * np.cos(r1 + r2) * n0
        ns2 = 0.5 * eps * np.cos(r1) * n0
        transport = _k.Transport(p, grid)
        for name, fn, ns in (("qde1", _c.equilibrium_qde1, ns1), ("qde2", _c.equilibrium_qde2, ns2)):
            g = fn(n0, ns, p, grid).g
            m0, ms = _c.band_moments(g, grid)
            out[f"{name}_constraint"] = max(np.abs(m0 - n0).max(), np.abs(ms - ns).max())
            out[f"{name}_parity"] = _parity_error(g, grid)
            Tg = PauliSymbol.from_components(transport(np.array(g.components())))
            t0, ts = _c.band_moments(Tg, grid)
            out[f"{name}_Tg_band"] = max(np.abs(t0 + ts).max(), np.abs(t0 - ts).max())
        nv = np.stack([0.2 * n0 * np.cos(r2), 0.1 * n0 * np.sin(r1), 0.1 * n0])
        J = np.stack([0.3 * np.sin(r2), 0.2 * np.cos(r1)])
        for name, fn, vec in (("qhe1", _c.equilibrium_qhe1, nv), ("qhe2", _c.equilibrium_qhe2, 3 * eps * nv)):
            g = fn(n0, vec, J, p, grid).g
            a, b, c = _c.hydro_moments(g, grid)
            out[f"{name}_constraint"] = max(np.abs(a - n0).max(), np.abs(b - vec).max(), np.abs(c - J).max())
        return out

    out, rt = _timed(work)
    worst = max(v for k, v in out.items() if not k.endswith("parity"))
    parity = max(v for k, v in out.items() if k.endswith("parity"))
    ok = worst <= 1e-7 and parity <= 1e-13
    return CheckResult(4, "moment constraints, parity and <(Tg)+-> = 0", ok, worst,
                       "<= 1e-7 (parity <= 1e-13)", rt, out)


def check_sms_identity():
    def work():
        grid = _moment_grid()
        diff = [sms_identity_error(e, grid) for e in EPS_LADDER]
        pg = grid.position
        r1, r2 = pg.mesh()
        A = -np.log((1 + 0.2 * np.cos(r1)) / (2 * np.pi))
        nu = np.stack([0.1 * np.sin(r2), 0.05 * np.cos(r1)])
        B = np.stack([0.3 * np.cos(r2), 0.2 + 0 * r1, 0.1 * np.sin(r1)])
        pol = []
        for e in EPS_LADDER:
            n0, nv, _ = _c.hydro_moments_from_multipliers(A, nu, B, _c.ModelParams(epsilon=e), grid)
            pol.append(float(np.max(np.sqrt(np.sum(nv ** 2, axis=0)) / n0)))
        return diff, pol

    (diff, pol), rt = _timed(work)
    s_diff = _d.fit_slope(EPS_LADDER, diff)
    s_pol = _d.fit_slope(EPS_LADDER, pol)
    ok = s_diff >= 2.5 and s_pol >= 0.9
    return CheckResult(5, "multiplier identity slopes", ok, f"diffusive {s_diff:.3f}, hydrodynamic {s_pol:.3f}",
                       "diffusive >= 2.5, hydrodynamic >= 0.9", rt,
                       {"diffusive_residuals": diff, "polarization": pol,
                        "diffusive_slope": s_diff, "hydro_slope": s_pol})


FLUID_PRESETS = ("heat-kernel", "qde-ladder", "qhe-ladder", "qde-potential", "qhe-potential")


def heat_kernel_error():
    sc = _d.preset("heat-kernel")
    out, rt = _timed(lambda: _d.run(sc))
    err = float(np.max(np.abs(out.final_state.n0 - _d.heat_kernel_solution(sc, sc.scenario["t_end"]))))
    return err, rt


def mass_drifts():
    """Relative mass drift of every fluid model on every fluid preset."""
    out = {}
    for name in FLUID_PRESETS:
        sc = _d.preset(name)
        family = ("qde1", "qde2") if sc.model.startswith("qde") else ("qhe1", "qhe2")
        for model in family:
            res = _d.run(sc.replace("scenario", model=model))
            out[f"{name}/{model}"] = res.summary["mass_drift"] / abs(res.records[0]["mass"])
    return out


def hydrostatic_residual():
    pg = PositionGrid(32)
    r1, r2 = pg.mesh()
    V = 0.3 * np.cos(r1) + 0.2 * np.sin(r2)
    p = _c.ModelParams(epsilon=0.0, potential=V)
    st = _f.HydroState(np.exp(-2 * p.gamma * V), np.zeros((3,) + pg.shape), np.zeros((2,) + pg.shape))
    return _f.rhs_qhe2(st, p, pg).sup_norm()


def check_fluid_sanity():
    t0 = time.perf_counter()
    heat, heat_rt = heat_kernel_error()
    drifts = mass_drifts()
    hydro = hydrostatic_residual()
    rt = time.perf_counter() - t0
    worst_mass = max(drifts.values())
    ok = heat <= 1e-6 and heat_rt < 30 and worst_mass <= 1e-10 and hydro < 1e-8
    return CheckResult(6, "fluid sanity", ok,
                       f"heat {heat:.2e} ({heat_rt:.1f} s), mass {worst_mass:.1e}, hydrostatic {hydro:.1e}",
                       "heat <= 1e-6 in < 30 s, mass <= 1e-10, hydrostatic < 1e-8", rt,
                       {"heat_error": heat, "heat_runtime": heat_rt, "mass": drifts, "hydrostatic": hydro})


def ladder_slopes():
    out = {}
    for name in ("qde-ladder", "qhe-ladder"):
        res = _d.sweep(_d.preset(name), "epsilon", EPS_LADDER, "ladder")
        out[name] = (res.slope, res.metrics)
    return out


def check_ladder():
    out, rt = _timed(ladder_slopes)
    worst = min(s for s, _ in out.values())
    return CheckResult(7, "model-consistency ladder", worst >= 1.5,
                       ", ".join(f"{k} {s:.3f}" for k, (s, _) in out.items()), "slope >= 1.5", rt,
                       {k: {"slope": s, "divergence": m} for k, (s, m) in out.items()})


def kinetic_errors(name):
    out = _d.run(_d.preset(name))
    taus = _d.preset(name).kinetic["taus"]
    return [out.summary[f"error_tau_{t:g}"] for t in taus], taus


def check_kinetic(name):
    (errs, taus), rt = _timed(lambda: kinetic_errors(name))
    mono = all(b < a for a, b in zip(errs, errs[1:]))
    return CheckResult(8, f"kinetic to fluid ({name})", mono and rt < 600,
                       " > ".join(f"{e:.3e}" for e in errs), "decreasing over tau 0.4, 0.2, 0.1 in < 600 s", rt,
                       {"taus": taus, "errors": errs})


def determinism_scenarios():
    """Small versions of acceptance scenarios used for the thread comparison."""
    kin = _d.preset("kinetic-hydrodynamic").replace("grid", n_r=8, n_p=32)
    kin = kin.replace("scenario", t_end=0.05)
    kin = kin.replace("kinetic", taus=[0.2])
    return [_d.preset("heat-kernel"), _d.preset("qhe-potential"), _d.preset("qde-potential"), kin]


def diagnostics_bytes(sc, threads):
    prev = _g.get_threads()
    _g.set_threads(threads)
    try:
        with tempfile.TemporaryDirectory() as tmp:
            _d.run(sc, tmp)
            return (Path(tmp) / "diagnostics.txt").read_bytes()
    finally:
        _g.set_threads(prev)


def check_determinism(scenarios=None):
    def work():
        out = {}
        for sc in scenarios or determinism_scenarios():
            runs = [diagnostics_bytes(sc, t) for t in (1, 1, 4, 4)]
            out[sc.scenario["name"]] = all(r == runs[0] for r in runs)
        return out

    out, rt = _timed(work)
    ok = all(out.values())
    return CheckResult(9, "determinism across thread counts", ok,
                       f"{sum(out.values())}/{len(out)} identical", "all identical", rt, out)


def run_all(report=print, skip_kinetic=False):
    """Run every criterion; returns the list of results."""
    checks = [check_gamma_constant, check_expansion_order, check_sms_order, check_moment_constraints,
              check_sms_identity, check_fluid_sanity, check_ladder]
    if not skip_kinetic:
        checks += [lambda: check_kinetic("kinetic-diffusive"), lambda: check_kinetic("kinetic-hydrodynamic")]
    checks.append(check_determinism)
    results = []
    for fn in checks:
        res = fn()
        report(res.line())
        results.append(res)
    return results
