"""Scenario configuration files.

Configs are TOML documents restricted to flat ``key = value`` pairs inside
the sections listed in :data:`SCHEMA`.  Unknown sections or keys are
rejected so that a misspelt parameter never silently falls back to its
default.  Example::

    [scenario]
    model = "qde1"
    t_end = 0.1

    [grid]
    n_r = 64

    [params]
    epsilon = 0.05

    [initial]
    preset = "cosine"
    amplitude = 0.2
"""

import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ParseError, ValidationError

MODELS = ("qde1", "qde2", "qhe1", "qhe2", "kinetic-diffusive", "kinetic-hydrodynamic")
INITIAL_PRESETS = ("uniform", "cosine", "bump", "planar", "hydrostatic")
POTENTIAL_PRESETS = ("none", "cosine")
SWEEP_AXES = ("epsilon", "tau", "dt", "grid")
SWEEP_METRICS = ("ladder", "kinetic_error", "mass_drift", "expansion_first_order", "expansion_sms",
                 "sms_identity", "heat_kernel")

_POS = ("positive", lambda v: v > 0)
_NONNEG = ("non-negative", lambda v: v >= 0)
_ANY = ("finite", lambda v: True)
_POW2 = ("a power of two >= 4", lambda v: v >= 4 and v & (v - 1) == 0)
_UNIT = ("in [0, 1)", lambda v: 0 <= v < 1)

# section -> key -> (type, default, (range name, check) or choices)
SCHEMA = {
    "scenario": {
        "name": (str, "scenario", None),
        "model": (str, "qde1", MODELS),
        "t_end": (float, 0.1, _POS),
        "dt": (float, 0.0, _NONNEG),
        "scheme": (str, "rk4", ("rk4", "ssprk3")),
        "output_every": (int, 0, _NONNEG),
        "snapshot_every": (int, 0, _NONNEG),
    },
    "grid": {
        "n_r": (int, 32, _POW2),
        "n_p": (int, 32, _POW2),
        "length": (float, 2 * math.pi, _POS),
        "p_max": (float, 7.0, ("at least 6", lambda v: v >= 6)),
    },
    "params": {
        "epsilon": (float, 0.05, _NONNEG),
        "gamma": (float, 1.0, _POS),
        "tau": (float, 1.0, _POS),
        "x_switch": (float, 1e-3, _POS),
        "delta_pol": (float, 1e-6, _POS),
        "constants": (str, "grid", ("grid", "continuum")),
    },
    "initial": {
        "preset": (str, "cosine", INITIAL_PRESETS),
        "background": (float, 1.0, _POS),
        "amplitude": (float, 0.2, _NONNEG),
        "width": (float, 0.6, _POS),
        "polarization": (float, 0.0, _UNIT),
        "profile": (str, "cosine", ("cosine", "uniform")),
        "sms_factor": (float, 0.0, _NONNEG),
        "flow": (float, 0.0, _ANY),
    },
    "potential": {
        "preset": (str, "none", POTENTIAL_PRESETS),
        "amplitude1": (float, 0.0, _ANY),
        "amplitude2": (float, 0.0, _ANY),
    },
    "kinetic": {
        "closure": (str, "", ("", "qde1", "qde2", "qhe1", "qhe2")),
        "taus": (list, [0.4, 0.2, 0.1], None),
    },
    "sweep": {
        "axis": (str, "epsilon", SWEEP_AXES),
        "values": (list, [], None),
        "metric": (str, "ladder", SWEEP_METRICS),
        "min_slope": (float, 0.0, _ANY),
    },
}


@dataclass
class Scenario:
    """Validated run description; sections mirror the config file."""

    scenario: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    potential: dict = field(default_factory=dict)
    kinetic: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)

    @property
    def model(self):
        return self.scenario["model"]

    @property
    def is_kinetic(self):
        return self.model.startswith("kinetic")

    def replace(self, section, **kw):
        """Copy with updated keys of one section (validated)."""
        data = {s: dict(getattr(self, s)) for s in SCHEMA}
        data[section].update(kw)
        return validate(data)

    def as_dict(self):
        return {s: dict(getattr(self, s)) for s in SCHEMA}


def _coerce(section, key, value, spec):
    typ, _, check = spec
    name = f"{section}.{key}"
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(name, f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ValidationError(name, "must be finite")
    elif typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(name, f"expected an integer, got {value!r}")
    elif typ is str:
        if not isinstance(value, str):
            raise ValidationError(name, f"expected a string, got {value!r}")
    elif typ is list:
        if not isinstance(value, list):
            raise ValidationError(name, f"expected a list, got {value!r}")
        out = []
        for v in value:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError(name, f"list entries must be finite numbers, got {v!r}")
            out.append(v)
        return out
    if isinstance(check, tuple) and len(check) == 2 and callable(check[1]):
        if not check[1](value):
            raise ValidationError(name, f"must be {check[0]}, got {value!r}")
    elif isinstance(check, tuple) and value not in check:
        raise ValidationError(name, f"must be one of {', '.join(map(repr, check))}, got {value!r}")
    return value


def validate(data):
    """Check a nested mapping against :data:`SCHEMA` and fill defaults."""
    out = {}
    for section, value in data.items():
        if section not in SCHEMA:
            raise ValidationError(section, "unknown section")
        if not isinstance(value, dict):
            raise ValidationError(section, "expected a section table")
    for section, keys in SCHEMA.items():
        given = data.get(section, {})
        for key, value in given.items():
            if key not in keys:
                raise ValidationError(f"{section}.{key}", "unknown key")
            if isinstance(value, dict):
                raise ValidationError(f"{section}.{key}", "nested tables are not allowed")
        sec = {}
        for key, spec in keys.items():
            raw = given.get(key, spec[1])
            sec[key] = _coerce(section, key, raw, spec)
        out[section] = sec
    sc = Scenario(**out)
    _cross_checks(sc)
    return sc


def _cross_checks(sc):
    if sc.kinetic["closure"]:
        want = "qd" if sc.model == "kinetic-diffusive" else "qh"
        if sc.is_kinetic and not sc.kinetic["closure"].startswith(want):
            raise ValidationError("kinetic.closure", f"closure does not match model {sc.model}")
    if any(t <= 0 for t in sc.kinetic["taus"]):
        raise ValidationError("kinetic.taus", "relaxation times must be positive")
    if sc.initial["preset"] == "hydrostatic" and sc.model not in ("qhe1", "qhe2"):
        raise ValidationError("initial.preset", "hydrostatic data needs a hydrodynamic fluid model")


_LOC = re.compile(r"at line (\d+), column (\d+)")


def parse_text(text):
    """Parse config text into a :class:`Scenario`."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        if line is None:
            m = _LOC.search(str(exc))
            if m:
                line, col = int(m.group(1)), int(m.group(2))
        msg = getattr(exc, "msg", None) or _LOC.sub("", str(exc)).strip(" ()")
        raise ParseError(msg, line, col) from None
    return validate(data)


def parse_config(path):
    """Read and validate a config file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = raw[: exc.start].count(b"\n") + 1
        raise ParseError("file is not valid UTF-8", line, None) from None
    return parse_text(text)


def default_scenario(**sections):
    """Scenario with defaults, overriding whole sections by keyword."""
    return validate({k: v for k, v in sections.items()})
