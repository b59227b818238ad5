"""Scenario presets, single runs and convergence sweeps."""

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import closure as _c
from . import fluid as _f
from . import kinetic as _k
from . import output as _o
from .grid import PhaseSpaceGrid, PositionGrid
from .errors import GrapheneMomentsError, ValidationError

PARTNER = {"qde1": "qde2", "qde2": "qde1", "qhe1": "qhe2", "qhe2": "qhe1"}
DIFFUSIVE = ("qde1", "qde2")


class RunFailure(GrapheneMomentsError):
    """A solver error with the scenario that triggered it."""

    def __init__(self, scenario, exc):
        self.scenario = scenario
        self.cause = exc
        super().__init__(f"scenario {scenario.scenario['name']!r} ({scenario.model}): "
                         f"{type(exc).__name__}: {exc}")


@dataclass
class RunOutput:
    records: list
    snapshots: list = field(default_factory=list)  # (t, {name: array})
    summary: dict = field(default_factory=dict)
    final_state: object = None

    def write(self, out_dir, grid_dims):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _o.write_diagnostics(out / "diagnostics.txt", self.records)
        for i, (t, fields) in enumerate(self.snapshots):
            _o.write_snapshot(out / f"snapshot_{i:04d}.bin", fields, grid_dims, t)
        write_summary(out / "summary.txt", self.summary)
        return out


@dataclass
class SweepOutput:
    axis: str
    values: list
    metrics: list
    outputs: list
    slope: float
    summary: dict = field(default_factory=dict)


def write_summary(path, summary):
    lines = [f"{k} = {_o.format_value(v) if isinstance(v, (int, float, np.number)) else v}"
             for k, v in summary.items()]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


# ---------------------------------------------------------------------------
# presets


def position_grid(sc):
    return PositionGrid(sc.grid["n_r"], sc.grid["length"])


def phase_grid(sc):
    g = sc.grid
    return PhaseSpaceGrid(g["n_r"], g["n_p"], g["length"], g["p_max"])


def _mesh(sc):
    pg = position_grid(sc)
    r1, r2 = pg.mesh()
    k = 2 * np.pi / pg.length
    return pg, k * r1, k * r2


def build_potential(sc):
    pg, x1, x2 = _mesh(sc)
    pot = sc.potential
    if pot["preset"] == "none":
        return None
    return pot["amplitude1"] * np.cos(x1) + pot["amplitude2"] * np.sin(x2)


def build_params(sc):
    p = sc.params
    return _c.ModelParams(
        epsilon=p["epsilon"], gamma=p["gamma"], tau=p["tau"], potential=build_potential(sc),
        x_switch=p["x_switch"], delta_pol=p["delta_pol"], constants=p["constants"],
    )


def periodic_bump(r1, r2, length, width, images=3):
    """Sum of periodic images of ``exp(-|r - c|^2 / (2 width^2))`` centred in the box."""
    c = 0.5 * length
    tot = np.zeros_like(r1)
    for i in range(-images, images + 1):
        for j in range(-images, images + 1):
            tot += np.exp(-((r1 - c + i * length) ** 2 + (r2 - c + j * length) ** 2) / (2 * width ** 2))
    return tot


def heat_kernel_solution(sc, t):
    """Exact density for the ``bump`` preset under diffusion with ``D = 1/(4 gamma^2)``."""
    pg = position_grid(sc)
    r1, r2 = pg.mesh()
    ini = sc.initial
    D = 1.0 / (4 * sc.params["gamma"] ** 2)
    w2 = ini["width"] ** 2
    s2 = w2 + 2 * D * t
    return ini["background"] + ini["amplitude"] * (w2 / s2) * periodic_bump(r1, r2, pg.length, np.sqrt(s2))


def initial_state(sc, params=None):
    """Fluid state of the configured initial preset."""
    params = params or build_params(sc)
    pg, x1, x2 = _mesh(sc)
    ini = sc.initial
    bg, amp = ini["background"], ini["amplitude"]
    preset = ini["preset"]
    if preset == "uniform":
        n0 = np.full(pg.shape, bg)
    elif preset == "cosine":
        n0 = bg + amp * np.sin(x1) * np.cos(x2)
    elif preset == "bump":
        r1, r2 = pg.mesh()
        n0 = bg + amp * periodic_bump(r1, r2, pg.length, ini["width"])
    elif preset == "planar":
        n0 = bg + amp * np.sin(x1)
    else:  # hydrostatic
        n0 = bg * np.exp(-2 * params.gamma * params.potential_on(pg.n))
    pol = ini["polarization"] + ini["sms_factor"] * params.epsilon
    zero = np.zeros(pg.shape)
    diffusive = sc.model in DIFFUSIVE or sc.model == "kinetic-diffusive"
    if preset in ("cosine", "planar") and ini["profile"] == "cosine":
        profile = np.cos(x1)
    else:
        profile = np.ones(pg.shape)
    if diffusive:
        return _f.DiffusiveState(n0, pol * profile * n0)
    if preset == "hydrostatic":
        return _f.HydroState(n0, np.zeros((3,) + pg.shape), np.zeros((2,) + pg.shape))
    nvec = np.stack([pol * profile * n0, zero, zero])
    flow = np.sin(x1) if preset == "planar" else np.cos(x2)
    J = np.stack([ini["flow"] * flow, zero])
    return _f.HydroState(n0, nvec, J)


# ---------------------------------------------------------------------------
# runs


def _fluid_run(sc, model=None, params=None):
    model = model or sc.model
    params = params or build_params(sc)
    st = initial_state(sc, params)
    dt = sc.scenario["dt"] or None
    every = sc.scenario["output_every"] or None
    return _f.integrate(model, st, params, position_grid(sc), sc.scenario["t_end"], dt=dt,
                        scheme=sc.scenario["scheme"], output_every=every)


def _snapshots(sc, times, states):
    k = sc.scenario["snapshot_every"]
    if not k:
        return []
    last = len(times) - 1
    return [(t, _o.state_fields(s)) for i, (t, s) in enumerate(zip(times, states))
            if i % k == 0 or i == last]


def kinetic_closure(sc):
    scaling = "diffusive" if sc.model == "kinetic-diffusive" else "hydrodynamic"
    return scaling, sc.kinetic["closure"] or _k.CLOSURES[scaling][0]


def _kinetic_run(sc):
    params = build_params(sc)
    scaling, closure = kinetic_closure(sc)
    pos = position_grid(sc)
    st = initial_state(sc, params)
    ref_dt = sc.scenario["dt"] or 0.25 * _f.cfl_dt(closure, st, params, pos)
    every = sc.scenario["output_every"] or None
    ref = _f.integrate(closure, st, params, pos, sc.scenario["t_end"], dt=ref_dt, output_every=every)
    runs = _k.run_kinetic(st, params, phase_grid(sc), scaling, sc.scenario["t_end"],
                          sc.kinetic["taus"], closure, record_times=ref.times[1:])
    records, summary, snaps = [], {"closure": closure}, []
    errors = []
    for tau, run in runs.items():
        for rec, s, t in zip(run.records, run.states, run.times):
            j = int(np.argmin(np.abs(np.asarray(ref.times) - t)))
            records.append({"tau": tau, **rec, "moment_error": _k.moment_error(s, ref.states[j])})
        err = _k.moment_error(run.states[-1], ref.states[-1])
        errors.append(err)
        summary[f"error_tau_{tau:g}"] = err
        summary[f"steps_tau_{tau:g}"] = run.steps
        snaps += [(t, {f"tau{tau:g}_{k}": v for k, v in f.items()})
                  for t, f in _snapshots(sc, run.times, run.states)]
    order = np.argsort(-np.asarray(sc.kinetic["taus"]))
    ordered = [errors[i] for i in order]
    summary["monotone"] = int(all(b < a for a, b in zip(ordered, ordered[1:])))
    return RunOutput(records, snaps, summary, runs)


def run(sc, out_dir=None):
    """Execute one scenario; write outputs to ``out_dir`` when given."""
    try:
        if sc.is_kinetic:
            out = _kinetic_run(sc)
        else:
            traj = _fluid_run(sc)
            rec = traj.records
            out = RunOutput(rec, _snapshots(sc, traj.times, traj.states), {
                "model": sc.model,
                "steps": traj.steps,
                "rejected_steps": traj.rejected_steps,
                "mass_drift": abs(rec[-1]["mass"] - rec[0]["mass"]),
            }, traj.states[-1])
    except GrapheneMomentsError as exc:
        raise RunFailure(sc, exc) from exc
    if out_dir is not None:
        out.write(out_dir, [sc.grid["n_r"], sc.grid["n_r"]])
    return out


# ---------------------------------------------------------------------------
# sweeps


def fit_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``; ``nan`` unless all ``y > 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.all(y > 0):
        return float("nan")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _apply_axis(sc, axis, value):
    if axis == "epsilon":
        return sc.replace("params", epsilon=float(value))
    if axis == "tau":
        sc = sc.replace("params", tau=float(value))
        return sc.replace("kinetic", taus=[float(value)])
    if axis == "dt":
        return sc.replace("scenario", dt=float(value))
    return sc.replace("grid", n_r=int(value))


def _metric(sc, metric, seed):
    from . import verification as _v

    if metric == "ladder":
        if sc.model not in PARTNER:
            raise ValidationError("sweep.metric", "the ladder metric needs a fluid model")
        a = _fluid_run(sc).states[-1]
        b = _fluid_run(sc, PARTNER[sc.model]).states[-1]
        return (a - b).sup_norm(), None
    if metric == "mass_drift":
        out = run(sc)
        return out.summary["mass_drift"], out
    if metric == "heat_kernel":
        out = run(sc)
        exact = heat_kernel_solution(sc, sc.scenario["t_end"])
        return float(np.max(np.abs(out.final_state.n0 - exact))), out
    if metric == "kinetic_error":
        out = run(sc)
        return out.summary[f"error_tau_{sc.kinetic['taus'][0]:g}"], out
    grid = phase_grid(sc)
    if metric == "expansion_first_order":
        return _v.expansion_residual(sc.params["epsilon"], grid, seed, sms=False), None
    if metric == "expansion_sms":
        return _v.expansion_residual(sc.params["epsilon"], grid, seed, sms=True), None
    # sms_identity
    return _v.sms_identity_error(sc.params["epsilon"], grid, build_params(sc)), None


def sweep(sc, axis=None, values=None, metric=None, seed=0):
    """Run the scenario for each axis value and fit the log-log slope of the metric."""
    axis = axis or sc.sweep["axis"]
    values = list(values if values is not None else sc.sweep["values"])
    metric = metric or sc.sweep["metric"]
    if len(values) < 2:
        raise ValidationError("sweep.values", "a sweep needs at least two values")
    metrics, outputs = [], []
    for v in values:
        sub = _apply_axis(sc, axis, v)
        try:
            m, out = _metric(sub, metric, seed)
        except GrapheneMomentsError as exc:
            if isinstance(exc, (RunFailure, ValidationError)):
                raise
            raise RunFailure(sub, exc) from exc
        metrics.append(float(m))
        outputs.append(out)
    x = [sc.grid["length"] / v for v in values] if axis == "grid" else values
    slope = fit_slope(x, metrics)
    summary = {"axis": axis, "metric": metric, "slope": slope}
    for v, m in zip(values, metrics):
        summary[f"{metric}_{axis}_{v:g}"] = m
    if metric == "kinetic_error":
        ordered = [m for _, m in sorted(zip(values, metrics), reverse=True)]
        summary["monotone"] = int(all(b < a for a, b in zip(ordered, ordered[1:])))
    return SweepOutput(axis, values, metrics, outputs, slope, summary)


def write_sweep(out_dir, result):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recs = [{"value": v, "metric": m} for v, m in zip(result.values, result.metrics)]
    _o.write_diagnostics(out / "sweep.txt", recs)
    write_summary(out / "summary.txt", result.summary)
    return out


# ---------------------------------------------------------------------------
# built-in scenarios


def preset(name):
    """Named scenarios used by the acceptance suite and the documentation."""
    from .config import validate

    table = {
        "heat-kernel": {
            "scenario": {"name": "heat-kernel", "model": "qde1", "t_end": 0.1, "output_every": 5},
            "grid": {"n_r": 128, "length": 10.0},
            "params": {"epsilon": 0.0},
            "initial": {"preset": "bump", "amplitude": 1.0, "width": 0.6},
        },
        "qde-ladder": {
            "scenario": {"name": "qde-ladder", "model": "qde1", "t_end": 0.1},
            "params": {"epsilon": 0.05},
            "initial": {"preset": "cosine", "amplitude": 0.3, "sms_factor": 0.5},
        },
        "qhe-ladder": {
            "scenario": {"name": "qhe-ladder", "model": "qhe1", "t_end": 0.1},
            "params": {"epsilon": 0.05},
            "initial": {"preset": "planar", "amplitude": 0.3, "sms_factor": 0.5, "flow": 0.2},
        },
        "qhe-potential": {
            "scenario": {"name": "qhe-potential", "model": "qhe1", "t_end": 0.2, "output_every": 10},
            "params": {"epsilon": 0.1},
            "initial": {"preset": "cosine", "amplitude": 0.3, "polarization": 0.2, "profile": "uniform",
                        "flow": 0.2},
            "potential": {"preset": "cosine", "amplitude1": 0.3, "amplitude2": 0.2},
        },
        "qde-potential": {
            "scenario": {"name": "qde-potential", "model": "qde2", "t_end": 0.2, "output_every": 10},
            "params": {"epsilon": 0.1},
            "initial": {"preset": "cosine", "amplitude": 0.3, "sms_factor": 0.5},
            "potential": {"preset": "cosine", "amplitude1": 0.3, "amplitude2": 0.2},
        },
        "kinetic-diffusive": {
            "scenario": {"name": "kinetic-diffusive", "model": "kinetic-diffusive", "t_end": 0.05},
            "grid": {"n_r": 32, "n_p": 32, "p_max": 7.0},
            "params": {"epsilon": 0.05},
            "initial": {"preset": "cosine", "amplitude": 0.2, "sms_factor": 0.5},
            "kinetic": {"taus": [0.4, 0.2, 0.1]},
        },
        "kinetic-hydrodynamic": {
            "scenario": {"name": "kinetic-hydrodynamic", "model": "kinetic-hydrodynamic", "t_end": 0.5},
            "grid": {"n_r": 32, "n_p": 32, "p_max": 7.0},
            "params": {"epsilon": 0.05},
            "initial": {"preset": "cosine", "amplitude": 0.2, "polarization": 0.3, "profile": "uniform",
                        "flow": 0.1},
            "kinetic": {"taus": [0.4, 0.2, 0.1]},
        },
    }
    if name not in table:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(table))}")
    return validate(table[name])


PRESETS = ("heat-kernel", "qde-ladder", "qhe-ladder", "qhe-potential", "qde-potential",
           "kinetic-diffusive", "kinetic-hydrodynamic")
