"""Command line interface: ``graphene-moments run | sweep | verify``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (a
``failure.txt`` dump is written to the output directory).
"""

import argparse
import os
import sys
import traceback
from pathlib import Path

from . import __version__
from . import driver as _d
from . import grid as _g
from .config import parse_config
from .errors import ConfigError, GrapheneMomentsError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
THREADS_ENV = "GRAPHENE_MOMENTS_THREADS"


def _parser():
    ap = argparse.ArgumentParser(prog="graphene-moments", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help=f"FFT worker threads (default: ${THREADS_ENV} or 1)")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")

    run = sub.add_parser("run", help="run one scenario")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path)
    src.add_argument("--preset", choices=_d.PRESETS)
    common(run)

    sw = sub.add_parser("sweep", help="convergence sweep over one axis")
    src = sw.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path)
    src.add_argument("--preset", choices=_d.PRESETS)
    sw.add_argument("--axis", choices=("epsilon", "tau", "dt", "grid"), default=None)
    sw.add_argument("--values", type=float, nargs="+", default=None)
    sw.add_argument("--metric", default=None)
    common(sw)

    ver = sub.add_parser("verify", help="run the oracle and invariant suite")
    ver.add_argument("--skip-kinetic", action="store_true", help="skip the kinetic tau sweeps")
    common(ver)
    return ap


def resolve_threads(arg, environ=None):
    environ = os.environ if environ is None else environ
    if arg is not None:
        value, source = arg, "--threads"
    elif environ.get(THREADS_ENV):
        raw = environ[THREADS_ENV]
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        source = THREADS_ENV
    else:
        return 1
    if value < 1:
        raise ConfigError(f"{source} must be >= 1, got {value}")
    return value


def _scenario(args):
    if args.config is not None:
        return parse_config(args.config)
    return _d.preset(args.preset)


def _dump_failure(out, exc):
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    text = [f"{type(exc).__name__}: {exc}", ""]
    scenario = getattr(exc, "scenario", None)
    if scenario is not None:
        for section, values in scenario.as_dict().items():
            text.append(f"[{section}]")
            text += [f"{k} = {v!r}" for k, v in values.items()]
        text.append("")
    text += traceback.format_exception(type(exc), exc, exc.__traceback__)
    (out / "failure.txt").write_text("\n".join(text))


def _cmd_run(args):
    sc = _scenario(args)
    out = _d.run(sc, args.out)
    for k, v in out.summary.items():
        print(f"{k} = {v}")
    return EXIT_OK


def _cmd_sweep(args):
    sc = _scenario(args)
    res = _d.sweep(sc, args.axis, args.values, args.metric, seed=args.seed)
    if args.out is not None:
        _d.write_sweep(args.out, res)
    for v, m in zip(res.values, res.metrics):
        print(f"{res.axis} = {v:g}: {m:.6e}")
    print(f"slope = {res.slope:.4f}")
    need = sc.sweep["min_slope"]
    if need and not res.slope >= need:
        print(f"slope below required {need}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_verify(args):
    from . import verification

    lines = []

    def report(line):
        print(line, flush=True)
        lines.append(line)

    results = verification.run_all(report, skip_kinetic=args.skip_kinetic)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "verify.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "verify": _cmd_verify}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        _g.set_threads(resolve_threads(args.threads))
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GrapheneMomentsError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        _dump_failure(getattr(args, "out", None), exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
