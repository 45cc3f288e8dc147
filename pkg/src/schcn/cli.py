"""Command-line entry point. Every subcommand writes CSV to stdout or ``--out``."""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import RateParams, build_schcn_cdf, schcn_cdf_asymptotic, schcn_cdf_eval
from .errors import GridMismatch, InvalidConfig, NonConvergent, SchcnError
from .experiments import (OUTPUTS, SweepConfig, compare_report, emit_curves, parse_curves,
                          parse_range, run_frame_length_sweep, run_sweep)
from .mimo import MimoConfig, mimo_fer_approx, mimo_fer_exact, mimo_optimal_threshold
from .scenario import Scenario, load_scenario, named_scenario
from .simulator import CRC_MODES, MODES, simulate_fer
from .threshold import ModulationSpec, ThresholdTable, snr_threshold_prior, snr_threshold_proposed
from .units import db_to_linear, linear_to_db

SEED_ENV = "SCHCN_SEED"
EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise InvalidConfig(f"{SEED_ENV}={raw!r} is not an integer") from None


def _g(x: float) -> str:
    return "%.17g" % x


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _resolve_scenario(args) -> Scenario:
    name = args.scenario
    if name in ("case1", "case2", "case3"):
        sc = named_scenario(name)
    elif name == "case0":
        raise InvalidConfig("case0 is the MIMO example; use the `mimo` or `sweep` subcommands")
    else:
        path = Path(name)
        if not path.is_file():
            raise InvalidConfig(f"scenario {name!r} is neither a named case nor a readable file")
        sc = load_scenario(path)
    changes = {}
    if getattr(args, "n", None) is not None:
        changes["n"] = args.n
    if getattr(args, "power_mode", None) is not None:
        changes["power_mode"] = args.power_mode
    if getattr(args, "L", None) is not None:
        changes["spec"] = ModulationSpec(sc.spec.c, args.L)
    return sc.with_(**changes) if changes else sc


# --- subcommands -------------------------------------------------------------

def cmd_threshold(args) -> str:
    table = ThresholdTable.build(args.d, args.L, args.c, prior=args.prior)
    rows = [["" if d is None else d, L, _g(c), _g(g), _g(g_db)] for d, L, c, g, g_db in table.entries]
    return _csv(rows, ["d", "L", "c", "gamma_t_linear", "gamma_t_db"])


def cmd_mimo(args) -> str:
    spec = ModulationSpec(args.c, args.L)
    n_paths = args.nt * args.nr
    prop_db = linear_to_db(snr_threshold_proposed(n_paths, spec))
    prior_db = linear_to_db(snr_threshold_prior(spec))
    rows = []
    for snr in parse_range(args.snr_db_range):
        cfg = MimoConfig(args.nt, args.nr, db_to_linear(snr))
        rows.append([_g(snr), _g(mimo_fer_exact(cfg, spec)), _g(mimo_fer_approx(cfg, spec)),
                     _g(linear_to_db(mimo_optimal_threshold(cfg, spec))), _g(prop_db), _g(prior_db)])
    return _csv(rows, ["snr_db", "fer_exact", "fer_threshold_model", "threshold_opt_db",
                       "threshold_proposed_db", "threshold_prior_db"])


def cmd_cdf(args) -> str:
    if args.lambda_eq is not None:
        rates = RateParams(args.lambda0, args.lambda_eq)
    elif args.lambda_sr is not None and args.lambda_rd is not None:
        rates = RateParams.from_links(args.lambda0, args.lambda_sr, args.lambda_rd, mode="upper")
    else:
        raise InvalidConfig("give --lambda-eq, or both --lambda-sr and --lambda-rd")
    grid = np.asarray(parse_range(args.gamma_range), dtype=float)
    if np.any(grid < 0):
        raise InvalidConfig("gamma grid must be nonnegative")
    cdf = build_schcn_cdf(args.n, args.nc, rates)
    closed = np.atleast_1d(schcn_cdf_eval(cdf, grid))
    asym = np.atleast_1d(schcn_cdf_asymptotic(args.n, args.nc, rates, grid))
    header = ["gamma", "F_closed", "F_asymptotic"]
    cols = [grid, closed, asym]
    if args.trials:
        rng = np.random.Generator(np.random.Philox(key=args.seed))
        g0 = rng.exponential(1.0 / rates.lambda_0, args.trials)
        relays = np.sort(rng.exponential(1.0 / rates.lambda_eq, (args.trials, args.n)), axis=1)
        total = np.sort(g0 + relays[:, args.n - args.nc:].sum(axis=1))
        cols.append(np.searchsorted(total, grid, side="right") / args.trials)
        header.append("F_empirical")
    rows = [[_g(v) for v in row] for row in zip(*cols)]
    return _csv(rows, header)


def cmd_sim(args) -> str:
    sc = _resolve_scenario(args)
    variants = args.nc if args.nc else [sc.n_c]
    rows = []
    for n_c in variants:
        s = sc.with_(n_c=n_c)
        for snr in parse_range(args.snr_db_range):
            est = simulate_fer(s, snr, args.trials, args.seed, args.mode, crc_mode=args.crc_mode,
                               workers=args.workers, importance=args.importance)
            rows.append([_g(snr), _g(est.fer), _g(est.ci95), est.trials, est.mode]
                        + ([n_c] if len(variants) > 1 else []))
    header = ["snr_db", "fer", "ci95", "trials", "mode"] + (["n_c"] if len(variants) > 1 else [])
    return _csv(rows, header)


def _sweep_config(args) -> SweepConfig:
    scenario = args.scenario if args.scenario == "case0" else _resolve_scenario(args)
    return SweepConfig(scenario=scenario, snr_grid=parse_range(args.snr_db_range), outputs=args.outputs,
                       trials=args.trials, seed=args.seed, nc_values=args.nc, workers=args.workers,
                       importance=args.importance, lambda_eq_mode=args.lambda_eq_mode)


def cmd_sweep(args) -> str:
    return emit_curves(run_sweep(_sweep_config(args)))


def cmd_framelen(args) -> str:
    if args.scenario == "case0":
        raise InvalidConfig("frame-length sweep applies to relay scenarios only")
    cfg = _sweep_config(args)
    cfg.scenario = _resolve_scenario(argparse.Namespace(**{**vars(args), "L": None}))
    return emit_curves(run_frame_length_sweep(cfg, args.frame_lengths))


def cmd_report(args) -> str:
    try:
        text = Path(args.input).read_text()
    except OSError as exc:
        raise InvalidConfig(f"cannot read {args.input}: {exc}") from None
    report = compare_report(parse_curves(text), reference=args.reference, gap_tol=args.gap_tol,
                            window=(args.fer_min, args.fer_max), slope_points=args.slope_points)
    return report.to_csv()


# --- parser ------------------------------------------------------------------

def _add_scenario_args(p, default="case1"):
    p.add_argument("--scenario", default=default, help="case0..case3 or a scenario file")
    p.add_argument("--n", type=int, help="override relay count")
    p.add_argument("--power-mode", choices=("total", "individual"))
    p.add_argument("--L", type=int, help="override frame length")
    p.add_argument("--nc", type=int, nargs="+", help="selected relay counts (N_R values for case0)")
    p.add_argument("--snr-db-range", default="0:30:2", help="start:stop:step or comma list")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=None, help=f"defaults to ${SEED_ENV} or 0")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--importance", action="store_true", help="importance-sampled semi-analytic estimator")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schcn", description="FER analysis of selective-combining hybrid AF/DF relay networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--out", help="write CSV here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("threshold", help="SNR threshold table")
    p.add_argument("--d", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--L", type=int, nargs="+", default=[100])
    p.add_argument("--c", type=float, default=2.0)
    p.add_argument("--prior", action="store_true", help="also emit the reciprocal-integral threshold")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("mimo", help="MIMO example: exact vs threshold-model FER and thresholds")
    p.add_argument("--nt", type=int, default=1)
    p.add_argument("--nr", type=int, default=1)
    p.add_argument("--L", type=int, default=100)
    p.add_argument("--c", type=float, default=2.0)
    p.add_argument("--snr-db-range", default="0:40:2")
    p.set_defaults(func=cmd_mimo)

    p = sub.add_parser("cdf", help="closed-form and asymptotic CDF of the combined SNR")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--nc", type=int, required=True)
    p.add_argument("--lambda0", type=float, required=True)
    p.add_argument("--lambda-eq", type=float)
    p.add_argument("--lambda-sr", type=float)
    p.add_argument("--lambda-rd", type=float)
    p.add_argument("--gamma-range", default="0:5:0.25")
    p.add_argument("--trials", type=int, default=0, help="add an empirical column from this many samples")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_cdf)

    p = sub.add_parser("sim", help="Monte Carlo FER")
    _add_scenario_args(p)
    p.add_argument("--mode", choices=MODES, default="semi_analytic")
    p.add_argument("--crc-mode", choices=CRC_MODES)
    p.set_defaults(func=cmd_sim)

    for name, func, help_ in (("sweep", cmd_sweep, "FER curves over an SNR grid"),
                              ("framelen", cmd_framelen, "FER curves for several frame lengths")):
        p = sub.add_parser(name, help=help_)
        _add_scenario_args(p)
        p.add_argument("--outputs", nargs="+", choices=OUTPUTS, default=["closed_form"])
        p.add_argument("--lambda-eq-mode", choices=("upper", "lower"), default="upper")
        if name == "framelen":
            p.add_argument("--frame-lengths", type=int, nargs="+", default=[100, 200, 400])
        p.set_defaults(func=func)

    p = sub.add_parser("report", help="compare curves in a sweep CSV")
    p.add_argument("input")
    p.add_argument("--reference", help="label of the reference curve (default: first)")
    p.add_argument("--gap-tol", type=float, default=0.2)
    p.add_argument("--fer-min", type=float, default=1e-4)
    p.add_argument("--fer-max", type=float, default=1e-1)
    p.add_argument("--slope-points", type=int, default=3)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        text = args.func(args)
    except (InvalidConfig, GridMismatch) as exc:
        print(f"schcn: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergent as exc:
        print(f"schcn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SchcnError as exc:
        print(f"schcn: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            print(f"schcn: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
