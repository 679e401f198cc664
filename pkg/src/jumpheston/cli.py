"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 degenerate
statistics, 3 campaign failure rate above 0.1%, 4 regime error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import config as cfgmod
from . import experiments as ex
from .errors import RegimeError, SchemeDomainError
from .estimator import condition_number
from .rng import substream
from .simulate import simulate_path

OUTDIR_ENV = "JUMPHESTON_OUTDIR"
DEFAULT_OUTDIR = "jumpheston_out"

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE, EXIT_FAILURE_RATE, EXIT_REGIME = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jumpheston", description="Simulate the jump-type Heston model and estimate its drift.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--preset", choices=sorted(cfgmod.PRESETS), default="subcritical",
                        help="base parameter set applied before --config")
    common.add_argument("--seed", type=int)
    common.add_argument("--M", type=int, help="number of trajectories")
    common.add_argument("--T", type=float, help="horizon")
    common.add_argument("--n", type=int, help="number of time steps")
    common.add_argument("--index", type=int, help="trajectory index for simulate/estimate")
    common.add_argument("--scheme", choices=cfgmod._CHOICES["campaign", "scheme"])
    common.add_argument("--variant", choices=cfgmod._CHOICES["campaign", "i3"], help="construction of i3")
    common.add_argument("--i45", choices=cfgmod._CHOICES["campaign", "i45"], help="construction of i4, i5")
    common.add_argument("--regime", choices=cfgmod._CHOICES["campaign", "regime"])
    common.add_argument("--workers", type=int)
    common.add_argument("--sweep-T", type=_csv_floats, help="comma-separated horizons, e.g. 10,100,300")
    common.add_argument("--reference", choices=("mixed-normal", "normal"), default="mixed-normal",
                        help="limit law used for the critical e3 check")
    common.add_argument("--out", type=Path, help=f"output directory (default ${OUTDIR_ENV} or ./{DEFAULT_OUTDIR})")
    for name, text in (("simulate", "write one trajectory as t,Y,S"),
                       ("estimate", "estimate psi from one trajectory"),
                       ("montecarlo", "run a campaign and write CSV tables"),
                       ("limitcheck", "compare scaled errors with their limit laws")):
        sub.add_parser(name, parents=[common], help=text)
    return parser


def effective_config(args) -> cfgmod.RunConfig:
    cfg = cfgmod.load(args.config, args.preset)
    over: dict = {"campaign": {}, "grid": {}}
    for flag, key in (("seed", "seed"), ("M", "M"), ("index", "index"), ("scheme", "scheme"),
                      ("variant", "i3"), ("i45", "i45"), ("regime", "regime"), ("workers", "workers")):
        value = getattr(args, flag)
        if value is not None:
            over["campaign"][key] = value
    if args.sweep_T is not None:
        over["campaign"]["sweep_T"] = args.sweep_T
    if args.T is not None:
        over["grid"]["T"] = args.T
        # keep the step size unless n is given explicitly
        if args.n is None and cfg.get("grid", "n") is not None:
            dt = cfg.number("grid", "T") / cfg.get("grid", "n")
            over["grid"]["dt"] = dt
    if args.n is not None:
        over["grid"]["n"] = args.n
    cfg = cfgmod.merge(cfg, over)
    if args.out is not None:
        cfg.tables["output"]["dir"] = str(args.out)
    cfgmod.validate(cfg)
    return cfg


def output_dir(cfg: cfgmod.RunConfig) -> Path:
    d = cfg.get("output", "dir") or os.environ.get(OUTDIR_ENV) or DEFAULT_OUTDIR
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _echo(cfg: cfgmod.RunConfig, out: Path) -> None:
    (out / "effective_config.toml").write_text(cfgmod.dumps(cfg))


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def cmd_simulate(cfg: cfgmod.RunConfig, args) -> int:
    params, grid = cfg.model_params(), cfg.sim_grid()
    index = cfg.get("campaign", "index")
    bundle = simulate_path(params, grid, substream(cfg.get("campaign", "seed"), index), cfg.scheme())
    out = output_dir(cfg)
    path = out / "path.csv"
    t = grid.times
    s = bundle.s
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "Y", "S"])
        for i in range(grid.n + 1):
            w.writerow([_fmt(t[i]), _fmt(bundle.y[i]), _fmt(s[i])])
    _echo(cfg, out)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_estimate(cfg: cfgmod.RunConfig, args) -> int:
    camp = cfg.campaign()
    index = cfg.get("campaign", "index")
    rec = ex.run_trajectory(camp, index)
    out = output_dir(cfg)
    _echo(cfg, out)
    print(f"trajectory {index}: T={camp.grid.T:g} n={camp.grid.n} scheme={camp.scheme.value} "
          f"i3={camp.i3_variant.value} i45={camp.i45_variant.value} route={camp.route.value}")
    if rec.failed:
        print(f"estimation failed: {rec.status} statistics", file=sys.stderr)
        return EXIT_DEGENERATE
    truth = camp.params.psi
    for name, est, true in zip(("theta", "kappa", "mu"), rec.estimate.psi_hat, truth):
        print(f"{name:>5}_hat = {est: .10f}   true = {true: .10f}   relative error = {(est - true) / true:+.3e}")
    if rec.status == "outside":
        print("note: estimate lies outside the parameter set (theta_hat or kappa_hat <= 0)")
    print(f"cond(G_T) = {condition_number(rec.estimate.g):.4e}   i1*i2 - T^2 = {rec.stats.cs_gap:.6e}")
    return EXIT_OK


def _write_campaign(out: Path, result: ex.EnsembleResult, bins: int, suffix: str = "") -> None:
    ex.write_records_csv(out / f"records{suffix}.csv", result.records)
    hist_dir = out / f"histograms{suffix}"
    hist_dir.mkdir(exist_ok=True)
    if result.ok_records:
        ex.write_histograms(hist_dir, result, bins)


def cmd_montecarlo(cfg: cfgmod.RunConfig, args) -> int:
    camp = cfg.campaign()
    out = output_dir(cfg)
    _echo(cfg, out)
    bins = cfg.get("campaign", "bins")
    horizons = cfg.sweep()
    if horizons:
        results = ex.sweep(camp, horizons)
        for T, res in results.items():
            _write_campaign(out, res, bins, f"_T{T:g}")
    else:
        results = {camp.grid.T: ex.monte_carlo(camp)}
        _write_campaign(out, results[camp.grid.T], bins)
    ex.write_summary_csv(out / "summary.csv", results)
    header, rows = ex.summary_rows(results)
    print(",".join(header))
    for row in rows[:3]:
        print(",".join(row))
    worst = max(results.values(), key=lambda r: r.failure_rate)
    if worst.failure_rate_exceeded:
        print(f"failure rate {worst.failure_rate:.2%} exceeds {ex.MAX_FAILURE_RATE:.1%}: {worst.failures}",
              file=sys.stderr)
        return EXIT_FAILURE_RATE
    return EXIT_OK


def cmd_limitcheck(cfg: cfgmod.RunConfig, args) -> int:
    camp = cfg.campaign()
    out = output_dir(cfg)
    _echo(cfg, out)
    result = ex.monte_carlo(camp)
    print(f"{camp.effective_regime.value} campaign: M={camp.M} T={camp.grid.T:g} n={camp.grid.n} "
          f"failures={result.n_failed}")
    lines = ex.limit_checks(result, args.reference)
    for line in lines:
        print(line)
    if camp.effective_regime.value == "critical":
        print("note: the raw e2 carries a finite-horizon bias; its check is on the centred sample")
    with (out / "limitcheck.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "statistic", "threshold", "passed"])
        for line in lines:
            w.writerow([line.name, _fmt(line.statistic), _fmt(line.threshold), int(line.passed)])
    if result.failure_rate_exceeded:
        return EXIT_FAILURE_RATE
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "montecarlo": cmd_montecarlo,
    "limitcheck": cmd_limitcheck,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = effective_config(args)
        return COMMANDS[args.command](cfg, args)
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (cfgmod.ConfigError, SchemeDomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
