"""Command line interface: ``carreg fit | bins | simulate | validate-distortion``."""
from __future__ import annotations

import argparse
import json
import sys

from . import io
from .distortion import resolve_distortion, validate_identifiability
from .errors import EXIT_DATA, CarError, ConfigError
from .simulation import BENCHMARK_M, resolve_model, run_monte_carlo


def _add_shared(p: argparse.ArgumentParser, many_m: bool = False) -> None:
    if many_m:
        p.add_argument("--m", type=int, nargs="+", default=None, help="bins per --n value")
    else:
        p.add_argument("--m", type=int, default=None, help="initial number of bins")
    p.add_argument("--min-bin-size", type=int, default=None, help="default: p + 2")
    p.add_argument("--det-threshold", type=float, default=io.DEFAULT_DET_THRESHOLD)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)


def _add_columns(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="CSV file with a header row")
    p.add_argument("--u-col", default="u")
    p.add_argument("--y-col", default="y")
    p.add_argument("--x-cols", default="x1", help="comma separated predictor columns")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carreg", description="Covariate-adjusted regression by binning."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="adjusted and naive estimates with intervals")
    _add_columns(fit)
    _add_shared(fit)
    fit.add_argument("--json", action="store_true", help="print the JSON report to stdout")

    bins = sub.add_parser("bins", help="export per-bin raw coefficients as CSV")
    _add_columns(bins)
    _add_shared(bins)
    bins.add_argument("--r", type=int, default=0, help="coefficient index, 0 = intercept")

    sim = sub.add_parser("simulate", help="Monte Carlo coverage study")
    _add_shared(sim, many_m=True)
    sim.add_argument("--model", default="paper-5.2", help="paper-5.2, identity or a JSON file")
    sim.add_argument("--n", type=int, nargs="+", required=True)
    sim.add_argument("--replicates", type=int, default=1000)
    sim.add_argument("--workers", type=int, default=1, help="threads; results do not depend on it")

    val = sub.add_parser("validate-distortion", help="Monte Carlo identifiability check")
    val.add_argument("distortion", help="paper-5.2, identity or a JSON file")
    val.add_argument("--samples", type=int, default=1_000_000)
    val.add_argument("--tol", type=float, default=0.01)
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--p", type=int, default=3, help="predictors for the identity entry")
    val.add_argument("--out", default=None)
    return parser


def _config(args) -> io.FitConfig:
    x_cols = [c.strip() for c in args.x_cols.split(",") if c.strip()]
    return io.FitConfig(
        u_col=args.u_col,
        y_col=args.y_col,
        x_cols=x_cols,
        m=args.m,
        min_bin_size=args.min_bin_size,
        det_threshold=args.det_threshold,
        level=args.level,
    ).validate()


def cmd_fit(args) -> int:
    cfg = _config(args)
    data = io.load_csv(args.input, cfg.u_col, cfg.y_col, cfg.x_cols)
    report, _ = io.fit_report(data, cfg)
    if args.out:
        io.dump_json(report, args.out)
    if args.json:
        sys.stdout.write(io.dump_json(report))
    else:
        print(io.format_fit_table(report))
    return 0


def cmd_bins(args) -> int:
    cfg = _config(args)
    data = io.load_csv(args.input, cfg.u_col, cfg.y_col, cfg.x_cols)
    rows = io.raw_coefficients(data, cfg, args.r)
    if args.out:
        io.write_raw_coefficients_csv(rows, args.out)
    else:
        print("midpoint,count,beta")
        for row in rows:
            print(f"{row.midpoint!r},{row.count},{row.beta!r}")
    return 0


def cmd_simulate(args) -> int:
    if args.seed is None:
        raise ConfigError("simulate requires an explicit --seed")
    model = resolve_model(args.model)
    if args.m is None:
        if model.name != "paper-5.2" or any(n not in BENCHMARK_M for n in args.n):
            raise ConfigError(
                f"--m is required unless the model is paper-5.2 with n in {sorted(BENCHMARK_M)}"
            )
        ms = [BENCHMARK_M[n] for n in args.n]
    elif len(args.m) == 1:
        ms = args.m * len(args.n)
    elif len(args.m) == len(args.n):
        ms = args.m
    else:
        raise ConfigError("give one --m, or one per --n")
    reports = [
        run_monte_carlo(
            model,
            n,
            args.replicates,
            m,
            level=args.level,
            seed=args.seed,
            workers=args.workers,
            min_bin_size=args.min_bin_size,
            det_threshold=args.det_threshold,
        )
        for n, m in zip(args.n, ms)
    ]
    if args.out:
        io.write_simulation_outputs(reports, args.out)
    print(io.format_simulation_table(reports))
    return 0


def cmd_validate(args) -> int:
    spec = resolve_distortion(args.distortion, args.p)
    report = validate_identifiability(spec, args.samples, args.tol, args.seed)
    text = io.dump_json(report.to_dict(), args.out)
    sys.stdout.write(text)
    return 0 if report.passed else EXIT_DATA


COMMANDS = {
    "fit": cmd_fit,
    "bins": cmd_bins,
    "simulate": cmd_simulate,
    "validate-distortion": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CarError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
