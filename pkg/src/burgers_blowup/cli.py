"""Command-line entry point: profile tables, single solves, verification runs and sweeps.

Exit codes: 0 pass, 1 a verified run failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import re
import sys
from pathlib import Path

import numpy as np

from .characteristics import blowup_detect, solve_characteristics
from .errors import BlowupError, ConfigurationError
from .profiles import Profile, large_x_asymptotic, profile_all, small_x_series
from .reports import atomic_write, report_stem, write_report, write_sweep
from .scenario_io import _parse_value, load_scenario
from .scenarios import (SWEEP_AXES, build_initial_data, calibrated, make_sampler, run_verification,
                        s_grid, sweep)
from .selfsim import PhysicalSnapshot, take_snapshot

log = logging.getLogger("burgers_blowup")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _num(v: float) -> str:
    v = float(v)
    if v == 0.0:
        v = 0.0  # drop the sign of -0.0
    return repr(v)


def _emit(text: str, output):
    if output is None or output == "-":
        sys.stdout.write(text)
    else:
        atomic_write(output, text)


# -- commands ---------------------------------------------------------------------

def cmd_profile(args) -> int:
    if args.i < 1:
        raise UsageError("profile index i must be a positive integer")
    lo, hi = args.range
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise UsageError(f"bad X range [{lo}, {hi}]")
    if args.n < 2:
        raise UsageError("n must be at least 2")
    p = Profile(args.i)
    X = np.linspace(lo, hi, args.n)
    psi, d1, d2 = profile_all(p, X)
    small = small_x_series(p, X)
    with np.errstate(invalid="ignore"):
        large = large_x_asymptotic(p, X)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["X", "Psi", "dPsi", "d2Psi", "Psi_small_series", "Psi_large_asymptotic"])
    for row in zip(X, psi, d1, d2, small, large):
        w.writerow([_num(v) for v in row])
    _emit(buf.getvalue(), args.output)
    return EXIT_PASS


def cmd_solve(args) -> int:
    sc = calibrated(load_scenario(args.scenario, args.override))
    data = build_initial_data(sc)
    rep = blowup_detect(data, n_scan=sc.blowup_grid)
    t = sc.T - sc.delta * math.exp(-args.s_offset) if args.t is None else args.t
    if args.x_range is None:
        span = 3.0 * sc.unit * max(1, sc.L)
        lo, hi = -span / 2, sc.y0s[-1] + span / 2
    else:
        lo, hi = args.x_range
        if lo >= hi:
            raise UsageError(f"bad x range [{lo}, {hi}]")
    if args.n < 2:
        raise UsageError("n must be at least 2")
    x = np.linspace(lo, hi, args.n)
    u, ux, _ = solve_characteristics(data, t, x, t_star=rep.t_star)
    snap = PhysicalSnapshot(t=t, x=x, u=u, t_star=rep.t_star, points=list(rep.points), ux=ux)
    log.info("t_star = %r, blowup points %s", rep.t_star, rep.points)
    _emit(snap.to_csv(), args.output)
    return EXIT_PASS


def cmd_simulate(args) -> int:
    sc = calibrated(load_scenario(args.scenario, args.override))
    data = build_initial_data(sc)
    rep = blowup_detect(data, n_scan=sc.blowup_grid)
    sampler = make_sampler(sc, data, rep.t_star)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", "X", "epsilon", "d_epsilon", "perturbation", "d_perturbation"])
    for s in s_grid(sc):
        snap = take_snapshot(sampler, float(s), n=sc.n_x, scenario_ref=sc.digest())
        for row in zip(snap.X_grid, snap.epsilon, snap.d_epsilon, snap.perturbation,
                       snap.d_perturbation):
            w.writerow([_num(s)] + [_num(v) for v in row])
    out = Path(args.output_dir)
    stem = report_stem(sc.name, sc.digest())
    atomic_write(out / f"{stem}-frames.csv", buf.getvalue())
    atomic_write(out / f"{stem}-blowup.json", rep.to_json() + "\n")
    print(out / f"{stem}-frames.csv")
    return EXIT_PASS


def _print_failures(checks):
    for c in checks:
        where = f" at s={c.where}" if c.where else ""
        print(f"FAILED {c.tag}: value={c.value!r} threshold={c.threshold!r}{where} ({c.detail})",
              file=sys.stderr)


def cmd_verify(args) -> int:
    sc = load_scenario(args.scenario, args.override)
    report = run_verification(sc)
    paths = write_report(report, args.output_dir)
    print(f"verdict: {report.verdict}")
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    if not report.passed:
        _print_failures(report.failures())
        return EXIT_FAIL
    return EXIT_PASS


def parse_axis(spec: str):
    """``name=v1;v2`` (scalar axes also accept commas); ``name=`` is an empty axis."""
    if "=" not in spec:
        raise UsageError(f"axis {spec!r} is not of the form name=values")
    name, raw = spec.split("=", 1)
    name = name.strip()
    if name not in SWEEP_AXES:
        raise UsageError(f"unknown sweep axis {name!r}; choose from {', '.join(SWEEP_AXES)}")
    sep = ";" if name == "i_list" else r"[;,]"
    items = [v for v in re.split(sep, raw) if v.strip()]
    return name, [_parse_value(name, v) for v in items]


def cmd_sweep(args) -> int:
    template = load_scenario(args.scenario, args.override)
    axes = dict(parse_axis(a) for a in args.axis)
    result = sweep(template, axes, workers=args.workers)
    paths = write_sweep(result, template, args.output_dir)
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    for row in result.scaling:
        print(f"|h_2| slope for i={tuple(row['i_list'])}: {row['slope']:.6f} "
              f"(reference {row['expected']:.6f})")
    bad = [p for p in result.points if p["verdict"] != "pass"]
    for p in bad:
        reason = p["error"] or ", ".join(p["failed"])
        print(f"FAILED point {p['name']}: {reason}", file=sys.stderr)
    return EXIT_FAIL if bad else EXIT_PASS


# -- parser -------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="burgers-blowup",
                 description="Multi-point self-similar blowup of inviscid Burgers: exact solves "
                             "and numerical verification of the decay bounds.")
    ap.add_argument("--log-level", default="WARNING",
                    choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("profile", help="table of Psi_i and its derivatives")
    p.add_argument("--i", type=int, default=1, help="profile index i >= 1 (default 1)")
    p.add_argument("--range", type=float, nargs=2, default=(-10.0, 10.0), metavar=("LO", "HI"),
                   help="X interval (default -10 10)")
    p.add_argument("--n", type=int, default=101, help="number of evenly spaced points (default 101)")
    p.add_argument("--output", help="CSV file (default: stdout)")
    p.set_defaults(func=cmd_profile)

    def scenario_args(q):
        q.add_argument("scenario", help="scenario file")
        q.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="key or section.key override, applied after the file")

    p = sub.add_parser("solve", help="exact solution at one physical time")
    scenario_args(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--t", type=float, help="physical time")
    g.add_argument("--s-offset", type=float, default=0.0,
                   help="e-folds past the data time (default 0)")
    p.add_argument("--x-range", type=float, nargs=2, metavar=("LO", "HI"),
                   help="x interval (default: a window around the bumps)")
    p.add_argument("--n", type=int, default=1001, help="number of points (default 1001)")
    p.add_argument("--output", help="CSV file (default: stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="self-similar frames over the monitored s-grid")
    scenario_args(p)
    p.add_argument("--output-dir", default=".", help="report directory (default: current)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="full monitor suite with a pass/fail verdict")
    scenario_args(p)
    p.add_argument("--output-dir", default=".", help="report directory (default: current)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="verification over parameter axes")
    scenario_args(p)
    p.add_argument("--axis", action="append", required=True, metavar="NAME=V1;V2",
                   help=f"one of {', '.join(SWEEP_AXES)}")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $BURGERS_BLOWUP_WORKERS or 1)")
    p.add_argument("--output-dir", default=".", help="report directory (default: current)")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"burgers-blowup: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlowupError as exc:
        print(f"burgers-blowup: run failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
