"""Command-line interface.

Exit codes: 0 success / all verdicts pass, 1 some acceptance check refuted,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config as cfgmod
from . import diagnostics, empirical, experiments, recurrence, seminorms
from .functions import parse
from .processes import OuParams, TimeGrid, load_ensemble, simulate_ou
from .sde import SdeModel, simulate_mild
from .tables import dumps

EXIT_OK, EXIT_REFUTED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _print(obj):
    print(dumps(obj))


def _expr(text):
    try:
        return parse(text)
    except (ValueError, SyntaxError) as exc:
        raise UsageError(f"bad expression {text!r}: {exc}") from None


def cmd_simulate(args):
    grid = TimeGrid(args.t0, args.h, args.n)
    if args.process == "ou":
        ens = simulate_ou(OuParams(args.alpha, args.sigma), grid, args.M, args.seed)
    else:
        _expr(args.f), _expr(args.g)
        model = SdeModel([args.delta], [args.f], [[args.g]], [args.noise], args.K_growth, args.K_lip)
        ens = simulate_mild(model, grid, args.burn_in, args.M, args.seed)
    ens.save(args.out)
    _print(ens.header())
    return EXIT_OK


def cmd_seminorm(args):
    h = _expr(args.expr)
    kind = seminorms.SeminormKind(args.kind, args.p)
    scan = seminorms.Scan()
    if args.quick:
        scan = seminorms.Scan(t_span=(-100.0, 100.0), ladder=(10.0, 30.0, 100.0, 300.0),
                              x_span=(-100.0, 100.0), x_step=1.0)
    _print(seminorms.seminorm(h, kind, scan).to_dict())
    return EXIT_OK


def cmd_recurrence(args):
    f = _expr(args.expr)
    if args.test == "almost-period":
        rep = recurrence.almost_period_scan(f, args.epsilon, tuple(args.window), tuple(args.shift_range),
                                            args.shift_step, args.grid_step, args.density_length)
    elif args.test == "double-shift":
        rep = recurrence.aa_double_shift_test(f, args.shifts, tuple(args.window), args.grid_step, args.tol)
    else:
        rep = recurrence.compact_aa_uniformity(f, args.shifts, tuple(args.window), args.grid_step, args.tol)
    _print(rep.to_dict())
    return EXIT_OK


def cmd_distance(args):
    mu = empirical.EmpiricalMeasure.load(args.first, args.metric)
    nu = empirical.EmpiricalMeasure.load(args.second, args.metric)
    result = empirical.bl_distance(mu, nu)
    if args.oracle:
        result = empirical.bl_distance_oracle(mu, nu)
    _print(result.to_dict())
    return EXIT_OK


def cmd_diagnose(args):
    ens = load_ensemble(args.ensemble)
    protocol = diagnostics.Protocol(seed=args.seed, cap=args.cap, cap_line=args.cap_line, splits=args.splits)
    if args.kind == "onedim":
        curve = diagnostics.onedim_distribution_curve(ens, args.base_times, args.shifts, protocol)
    elif args.kind == "findim":
        curve = diagnostics.findim_distribution_curve(ens, args.base_times, args.shifts, protocol)
    else:
        curve = diagnostics.path_distribution_curve(ens, args.base_times, args.shifts, args.levels, protocol)
    if args.out:
        curve.to_csv(args.out)
    _print({"kind": curve.kind, "rows": curve.rows(), "max_ratio": curve.max_ratio()})
    return EXIT_OK


def cmd_experiment(args):
    path = Path(args.config) if args.config else cfgmod.shipped_config(args.name)
    cfg = cfgmod.load_config(path)
    if cfg.scenario != args.name:
        raise UsageError(f"config is for scenario {cfg.scenario!r}, not {args.name!r}")
    out = args.out or cfg.output_dir
    if not out:
        raise UsageError("no output directory: pass --out or set output_dir")
    verdicts = experiments.run(cfg, out)
    for name, check in verdicts["checks"].items():
        print(f"{'PASS' if check['pass'] else 'FAIL'}  {name}")
    return EXIT_OK if verdicts["pass"] else EXIT_REFUTED


def cmd_validate(args):
    if args.schema:
        _print(cfgmod.schema())
        return EXIT_OK
    if not args.config:
        raise UsageError("give a config file or --schema")
    cfg = cfgmod.load_config(args.config)
    print(f"ok: scenario {cfg.scenario}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="aalab", description="Numerical laboratory for almost automorphy.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a path ensemble to an .npz file")
    s.add_argument("process", choices=["ou", "mild"])
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--h", type=float, default=0.05)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--M", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--f", default="0", help="drift expression in t and x (mild)")
    s.add_argument("--g", default="1", help="diffusion expression in t and x (mild)")
    s.add_argument("--delta", type=float, default=1.0)
    s.add_argument("--noise", type=float, default=1.0, help="noise variance (trace of Q)")
    s.add_argument("--K-growth", type=float, default=None)
    s.add_argument("--K-lip", type=float, default=None)
    s.add_argument("--burn-in", type=float, default=10.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("seminorm", help="Stepanov/Weyl/Besicovitch seminorm of an expression")
    s.add_argument("expr")
    s.add_argument("--kind", choices=["stepanov", "weyl", "besicovitch"], default="besicovitch")
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--quick", action="store_true", help="smaller scan grids")
    s.set_defaults(func=cmd_seminorm)

    s = sub.add_parser("recurrence", help="almost-period scan or double-shift test")
    s.add_argument("test", choices=["almost-period", "double-shift", "compact"])
    s.add_argument("expr")
    s.add_argument("--window", type=float, nargs=2, default=[-10.0, 10.0])
    s.add_argument("--grid-step", type=float, default=0.01)
    s.add_argument("--epsilon", type=float, default=0.1)
    s.add_argument("--shift-range", type=float, nargs=2, default=[0.0, 100.0])
    s.add_argument("--shift-step", type=float, default=0.1)
    s.add_argument("--density-length", type=float, default=None)
    s.add_argument("--shifts", type=float, nargs="+", default=None)
    s.add_argument("--tol", type=float, default=0.05)
    s.set_defaults(func=cmd_recurrence)

    s = sub.add_parser("distance", help="bounded-Lipschitz distance of two empirical measures (CSV)")
    s.add_argument("first")
    s.add_argument("second")
    s.add_argument("--metric", choices=["euclidean", "max"], default="euclidean")
    s.add_argument("--oracle", action="store_true", help="brute-force grid search (<= 3 points)")
    s.set_defaults(func=cmd_distance)

    s = sub.add_parser("diagnose", help="distribution curve of a saved ensemble")
    s.add_argument("ensemble")
    s.add_argument("--kind", choices=["onedim", "findim", "path"], default="onedim")
    s.add_argument("--base-times", type=float, nargs="+", default=[0.0],
                   help="base times (the time tuple for findim)")
    s.add_argument("--shifts", type=float, nargs="+", required=True)
    s.add_argument("--levels", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cap", type=int, default=diagnostics.CAP)
    s.add_argument("--cap-line", type=int, default=diagnostics.CAP_LINE)
    s.add_argument("--splits", type=int, default=diagnostics.SPLITS)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("experiment", help="run a named scenario and write a bundle")
    s.add_argument("name", choices=list(cfgmod.SCENARIOS))
    s.add_argument("--config", default=None, help="TOML or JSON config (default: shipped)")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("validate-config", help="validate a config file")
    s.add_argument("config", nargs="?")
    s.add_argument("--schema", action="store_true", help="print the JSON schema")
    s.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if args.command == "recurrence" and args.test != "almost-period" and not args.shifts:
        print("error: --shifts is required for this test", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, cfgmod.ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
