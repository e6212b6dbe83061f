"""Command-line entry point: ``bistwave <subcommand> PROBLEM [options]``.

Exit codes: 0 on a verdicted run (including inconclusive verdicts), 2 on
problem-file or argument errors, 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .expr import ExpressionError
from .problem import ProblemFormatError, load_problem

SCHEMA_VERSION = 1
EXIT_OK, EXIT_PARSE, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("bistwave")


# -- deterministic JSON ----------------------------------------------------

def _format_float(x: float) -> str:
    if math.isnan(x):
        return "null"
    if math.isinf(x):
        return '"+inf"' if x > 0 else '"-inf"'
    return f"{x:.12e}"


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with insertion-ordered keys and every float written as %.12e."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, bool) or obj is None:
        return "true" if obj is True else "false" if obj is False else "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        if obj in ("+inf", "-inf"):
            return f'"{obj}"'
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{inner}{dumps(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- helpers ---------------------------------------------------------------

def _options(args):
    from .shooting import IntegratorOptions
    return IntegratorOptions(rel_tol=args.rel_tol, abs_tol=args.abs_tol, match_tol=args.match_tol,
                             zero_threshold=max(IntegratorOptions().zero_threshold, 10 * args.abs_tol))


def _envelope(cmd: str, args, spec, result: dict, opts=None) -> dict:
    tol = {"bisection_tol": args.tol}
    if opts is not None:
        tol.update(opts.to_dict())
    return {"schema": f"bistwave.{cmd}/{SCHEMA_VERSION}", "version": __version__,
            "problem": {"path": str(args.problem), "name": spec.name, "sha256": spec.digest},
            "tolerances": tol, "result": result}


def _emit(args, payload: dict):
    text = dumps(payload) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _verdict_line(name: str, verdict: str, extra: str = ""):
    log.warning("%s: %s%s", name, verdict, f" ({extra})" if extra else "")


# -- subcommands -----------------------------------------------------------

def cmd_validate(args, spec):
    from .quantities import validate_problem
    rep = validate_problem(spec)
    for chk in rep.checks:
        _verdict_line(chk.name, chk.verdict, chk.detail)
    return _envelope("validate", args, spec, rep.to_dict())


def cmd_quantities(args, spec):
    from .quantities import derive_quantities, speed_bounds
    dq = derive_quantities(spec)
    br = speed_bounds(spec, dq)
    return _envelope("quantities", args, spec, {"quantities": dq.to_dict(), "brackets": br.to_dict()})


def cmd_thresholds(args, spec):
    from .quantities import derive_quantities
    from .speeds import threshold_cB, threshold_cF
    opts = _options(args)
    dq = derive_quantities(spec)
    rF = threshold_cF(spec, args.tol, opts, dq)
    rB = threshold_cB(spec, args.tol, opts, dq)
    _verdict_line("cF", f"{rF.value}", "saturated at bracket end" if rF.saturated else "")
    _verdict_line("cB", f"{rB.value}", "saturated at bracket end" if rB.saturated else "")
    return _envelope("thresholds", args, spec, {"cF": rF.to_dict(), "cB": rB.to_dict()}, opts)


def cmd_speed(args, spec):
    from .speeds import critical_speed
    opts = _options(args)
    rep = critical_speed(spec, args.tol, opts)
    _verdict_line("speed", rep.verdict, f"c* = {rep.cstar}" if rep.cstar is not None else "")
    return _envelope("speed", args, spec, rep.to_dict(), opts)


def cmd_profile(args, spec):
    from .profile import profile_residual, reconstruct_profile
    from .shooting import critical_trajectory
    from .speeds import UNIQUE, critical_speed
    opts = _options(args)
    rep = critical_speed(spec, args.tol, opts)
    if rep.verdict != UNIQUE:
        _verdict_line("profile", rep.verdict, "no wave to reconstruct")
        return _envelope("profile", args, spec, {"speed": rep.to_dict(), "profile": None}, opts)
    traj = critical_trajectory(spec, rep.cstar, opts)
    prof = reconstruct_profile(spec, traj, n_samples=args.samples, opts=opts)
    res = profile_residual(spec, prof, rep.cstar, traj=traj)
    if args.csv:
        Path(args.csv).write_text(prof.to_csv())
    if args.trajectory:
        Path(args.trajectory).write_text(_trajectory_csv(traj))
    _verdict_line("profile", "sharp left front" if math.isfinite(prof.z0) else "smooth left front")
    _verdict_line("profile", "sharp right front" if math.isfinite(prof.z1) else "smooth right front")
    return _envelope("profile", args, spec, {"cStar": rep.cstar, "profile": prof.metadata(),
                                             "residual": res.to_dict()}, opts)


def _trajectory_csv(traj) -> str:
    t, y = traj.nodes
    lines = ["t,y"] + [f"{a:.12e},{b:.12e}" for a, b in zip(t, y)]
    return "\n".join(lines) + "\n"


def cmd_check(args, spec):
    from .conditions import check_all
    reports = check_all(spec)
    for r in reports:
        _verdict_line(r.condition, r.verdict, r.detail)
    summary = ", ".join(f"{r.condition}={r.verdict}" for r in reports)
    print(summary, file=sys.stderr)
    return _envelope("check", args, spec, {"conditions": [r.to_dict() for r in reports], "summary": summary})


def cmd_simulate(args, spec):
    from .pde import measure_front_speed, simulate
    fld = simulate(spec, L=args.L, n_cells=args.cells, t_max=args.t_max, cfl_safety=args.cfl)
    speed = measure_front_speed(fld)
    if args.csv:
        Path(args.csv).write_text(fld.to_csv(stride=args.stride))
    _verdict_line("simulate", f"front speed {speed:.6f}")
    return _envelope("simulate", args, spec, {"front_speed": speed, "steps": fld.steps,
                                              "max_overshoot": fld.max_overshoot, "parameters": fld.params})


COMMANDS = {"validate": cmd_validate, "quantities": cmd_quantities, "thresholds": cmd_thresholds,
            "speed": cmd_speed, "profile": cmd_profile, "check": cmd_check, "simulate": cmd_simulate}
NEEDS_HYPOTHESES = ("thresholds", "speed", "profile")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bistwave", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("problem", type=Path, help="problem file (.toml or .json)")
        sp.add_argument("-o", "--output", help="write the JSON report here instead of stdout")
        sp.add_argument("--tol", type=float, default=1e-7, help="bisection tolerance on c")
        sp.add_argument("--rel-tol", type=float, default=1e-10)
        sp.add_argument("--abs-tol", type=float, default=1e-12)
        sp.add_argument("--match-tol", type=float, default=1e-7)
        sp.add_argument("-q", "--quiet", action="store_true", help="suppress verdict lines on stderr")
        if name == "profile":
            sp.add_argument("--samples", type=int, default=4000)
            sp.add_argument("--csv", help="write z, U, Uprime_left, Uprime_right here")
            sp.add_argument("--trajectory", help="write the critical trajectory (t, y) here")
        if name == "simulate":
            sp.add_argument("--L", type=float, default=40.0, help="half-width of the domain")
            sp.add_argument("--cells", type=int, default=2048)
            sp.add_argument("--t-max", type=float, default=30.0)
            sp.add_argument("--cfl", type=float, default=0.8)
            sp.add_argument("--csv", help="write snapshots (t, x, u) here")
            sp.add_argument("--stride", type=int, default=8, help="spatial stride of the snapshot CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        spec = load_problem(args.problem)
    except (OSError, ProblemFormatError, ExpressionError, ValueError) as exc:
        print(f"bistwave: cannot load {args.problem}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if args.command in NEEDS_HYPOTHESES:
        from .quantities import validate_problem
        rep = validate_problem(spec)
        if not rep.ok:
            bad = ", ".join(f"{c.name}: {c.detail}" for c in rep.checks if c.verdict != "satisfied")
            print(f"bistwave: {args.problem} fails the standing hypotheses ({bad}); "
                  f"run 'bistwave validate' for details", file=sys.stderr)
            return EXIT_PARSE
    try:
        payload = COMMANDS[args.command](args, spec)
    except (ArithmeticError, ExpressionError) as exc:
        print(f"bistwave: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(args, payload)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
