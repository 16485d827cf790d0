"""Command-line front end.

Subcommands: simulate (cross-section bias study), bounds (closed-form bound
evaluation), sweep (blocksize / dimension), empirical (historical pipeline
on a CSV), report (re-render tables from a stored run).  All outputs are
pure functions of (config, data, seed); manifests record config hashes.
Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis, empirical, experiments
from .errors import (MissingValue, NonMonotoneDates, ParseError, ResampleLabError)
from .portfolio import BacktestConfig

CONFIG_ERROR = 2
DATA_ERROR = 3


def _load_scenario(args) -> experiments.ScenarioConfig:
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise SystemExit(_fail(f"cannot read config {args.config}: {e}", CONFIG_ERROR))
        config = experiments.config_from_dict(doc)
    else:
        config = experiments.default_cross_section()
    if getattr(args, "seed", None) is not None:
        config.master_seed = args.seed
    return config


def _fail(msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def cmd_simulate(args) -> int:
    config = _load_scenario(args)
    try:
        report = experiments.run_bias_cross_section(config)
    except ResampleLabError as e:
        return _fail(str(e), DATA_ERROR)
    os.makedirs(args.out, exist_ok=True)
    if args.format == "csv":
        experiments.write_cross_section(report, args.out)
    else:
        experiments.write_results_json(report, args.out)
    experiments.write_manifest(args.out, config, "simulate")
    if report.failures:
        print(f"warning: {len(report.failures)} asset(s) failed within budget:", file=sys.stderr)
        for aid, msg in report.failures:
            print(f"  {aid}: {msg}", file=sys.stderr)
    print(f"wrote cross-section tables to {args.out}")
    return 0


def cmd_bounds(args) -> int:
    if args.data:
        try:
            table = empirical.load_returns(args.data)
        except (MissingValue, NonMonotoneDates, ParseError) as e:
            return _fail(str(e), DATA_ERROR)
        rows = []
        for a, aid in enumerate(table.asset_ids):
            try:
                b = empirical.estimate_bounds_from_data(table.column(a), args.n, args.gamma)
            except ResampleLabError as e:
                rows.append(f"{aid},,,,,\"{type(e).__name__}\"")
                continue
            rows.append(",".join([aid, _fmt(b.mean_bound), _fmt(b.var_bound),
                                  _fmt(b.sr_analytical), _fmt(b.sr_numerical),
                                  ";".join(b.flags)]))
        text = "asset_id,mean_bound,var_bound,sr_analytical,sr_numerical,flags\n" \
            + "\n".join(rows) + "\n"
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, "bounds.csv")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
            print(f"wrote {path}")
        else:
            sys.stdout.write(text)
        return 0
    if args.theta is None or args.psi is None:
        return _fail("bounds needs either --theta and --psi, or --data", CONFIG_ERROR)
    b = analysis.bounds(args.theta, args.psi, args.gamma, args.n)
    print(f"mean_bound {_fmt(b.mean_bound)}")
    print(f"var_bound {_fmt(b.var_bound)}")
    print(f"sr_analytical {_fmt(b.sr_analytical)}")
    print(f"sr_numerical {_fmt(b.sr_numerical)}")
    for f in b.flags:
        print(f"flag: {f}")
    return 0


def cmd_sweep(args) -> int:
    config = _load_scenario(args)
    os.makedirs(args.out, exist_ok=True)
    try:
        if args.kind == "blocksize":
            rows = experiments.run_blocksize_sweep(config)
            experiments.write_blocksize_sweep(rows, args.out)
        else:
            if args.config is None:
                config = experiments.default_dimension(master_seed=config.master_seed)
            rows = experiments.run_dimension_sweep(config)
            experiments.write_dimension_sweep(rows, args.out)
    except ResampleLabError as e:
        return _fail(str(e), DATA_ERROR)
    except ValueError as e:
        return _fail(str(e), CONFIG_ERROR)
    experiments.write_manifest(args.out, config, f"sweep:{args.kind}")
    print(f"wrote {args.kind} sweep to {args.out}")
    return 0


def cmd_empirical(args) -> int:
    cfg = BacktestConfig(n=args.n, gamma=args.gamma, estimator_mode="rolling_sample")
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            bt = doc.get("backtest", {})
            cfg = BacktestConfig(n=int(bt.get("n", args.n)),
                                 gamma=float(bt.get("gamma", args.gamma)),
                                 rf=float(bt.get("rf", 0.0)),
                                 estimator_mode=bt.get("estimator_mode", "rolling_sample"))
        except (OSError, json.JSONDecodeError, ValueError) as e:
            return _fail(f"bad config: {e}", CONFIG_ERROR)
    try:
        table = empirical.load_returns(args.data)
    except (MissingValue, NonMonotoneDates, ParseError) as e:
        return _fail(str(e), DATA_ERROR)
    except OSError as e:
        return _fail(str(e), DATA_ERROR)
    try:
        result = empirical.run_pipeline(table, cfg, seed=args.seed or 0,
                                        B=args.bootstrap, mean_block=args.mean_block,
                                        shuffles=args.shuffles)
    except ResampleLabError as e:
        return _fail(str(e), DATA_ERROR)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "differences.csv"), "w", encoding="utf-8") as fh:
        fh.write(empirical.differences_csv(result))
    with open(os.path.join(args.out, "regressions.json"), "w", encoding="utf-8") as fh:
        fh.write(empirical.regressions_json(result))
    n_err = sum(1 for r in result.records if r.error)
    if n_err:
        print(f"warning: {n_err} asset(s) failed; see the error column", file=sys.stderr)
    print(f"wrote differences.csv and regressions.json to {args.out}")
    return 0


def cmd_report(args) -> int:
    manifest = args.manifest
    run_dir = os.path.dirname(manifest) if manifest.endswith(".json") else manifest
    results = os.path.join(run_dir, "results.json")
    if not os.path.exists(results):
        return _fail(f"no results.json next to {manifest}", DATA_ERROR)
    experiments.rerender_from_results(results, args.out)
    print(f"re-rendered tables to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resample-lab",
                                description="Bias of IID/block resampled backtests "
                                            "for rolling-window mean-variance portfolios")
    sub = p.add_subparsers(dest="command")

    def common(sp, out_required=True):
        sp.add_argument("--config", help="scenario config JSON")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--seed", type=int, help="master seed override")
        sp.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="output table format (csv writes both; json only results.json)")

    sp = sub.add_parser("simulate", help="run the cross-section bias study")
    common(sp)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("bounds", help="evaluate the bias bounds")
    sp.add_argument("--theta", type=float, help="monthly Sharpe ratio")
    sp.add_argument("--psi", type=float, help="lag-1 return autocorrelation")
    sp.add_argument("--gamma", type=float, default=100.0, help="risk aversion")
    sp.add_argument("--n", type=int, default=60, help="rolling window length")
    sp.add_argument("--data", help="returns CSV for per-asset estimated bounds")
    sp.add_argument("--out", help="output directory (default: stdout)")
    sp.set_defaults(fn=cmd_bounds)

    sp = sub.add_parser("sweep", help="run the blocksize or dimension sweep")
    sp.add_argument("--kind", choices=("blocksize", "dimension"), required=True)
    common(sp)
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("empirical", help="run the historical pipeline on a CSV")
    sp.add_argument("--data", required=True, help="returns CSV (date,<id1>,...)")
    sp.add_argument("--config", help="backtest config JSON")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n", type=int, default=60)
    sp.add_argument("--gamma", type=float, default=100.0)
    sp.add_argument("--bootstrap", type=int, default=999, help="bootstrap replications B")
    sp.add_argument("--mean-block", type=float, default=10.0,
                    help="stationary bootstrap expected block length")
    sp.add_argument("--shuffles", type=int, default=1,
                    help="average the resampled estimate over this many shuffles")
    sp.set_defaults(fn=cmd_empirical)

    sp = sub.add_parser("report", help="re-render tables from a prior run")
    sp.add_argument("--manifest", required=True, help="manifest.json or its directory")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "fn", None):
        parser.print_usage(sys.stderr)
        return CONFIG_ERROR
    try:
        return args.fn(args)
    except SystemExit as e:
        if isinstance(e.code, int):
            return e.code
        raise


if __name__ == "__main__":
    sys.exit(main())
