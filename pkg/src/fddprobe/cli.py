"""Batch command-line interface: run experiments, sweeps, and CCDF post-processing."""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .harness import Method, ccdf, load_config, run_experiment


def _add_run_args(p):
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--seed", type=int, default=None, help="root seed override")
    p.add_argument("--trials", type=int, default=None, help="trial count override")
    p.add_argument("--out", default=None, help="output CSV path (default stdout)")
    p.add_argument(
        "--scale", choices=("desk", "paper"), default="desk",
        help="parameter preset used before applying the config file",
    )


def _run(args, require_sweep: bool) -> int:
    cfg = load_config(args.config, scale=args.scale, seed=args.seed, n_trials=args.trials)
    if require_sweep and cfg.sweep is None:
        print("error: 'sweep' requires a sweep axis in the config file", file=sys.stderr)
        return 2
    if not require_sweep and cfg.sweep is not None:
        # 'run' executes the base configuration only; use 'sweep' for the axis
        cfg.sweep = None
    table = run_experiment(cfg)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            table.to_csv(fh)
    else:
        table.to_csv(sys.stdout)
    return 0


def _ccdf(args) -> int:
    with open(args.results, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = [r for r in reader]
    if not rows:
        print("error: empty results file", file=sys.stderr)
        return 2
    methods = [args.method] if args.method else sorted({r["method"] for r in rows})
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        single = args.method is not None
        out.write("x,ccdf\n" if single else "method,x,ccdf\n")
        for name in methods:
            vals = [
                float(r["sum_rate"]) for r in rows
                if r["method"] == name and r["sum_rate"] != "nan"
            ]
            if not vals:
                continue
            grid = np.linspace(min(vals), max(vals), args.points)
            for x, p in ccdf(vals, grid):
                prefix = "" if single else f"{name},"
                out.write(f"{prefix}{x:.9g},{p:.9g}\n")
    finally:
        if args.out:
            out.close()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fddprobe",
        description="Downlink probing / uplink feedback link simulations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment configuration")
    _add_run_args(p_run)
    p_sweep = sub.add_parser("sweep", help="run the sweep axis given in the config")
    _add_run_args(p_sweep)

    p_ccdf = sub.add_parser("ccdf", help="empirical CCDF of per-trial sum rates")
    p_ccdf.add_argument("results", help="results CSV produced by 'run' or 'sweep'")
    p_ccdf.add_argument("--out", default=None, help="output CSV path (default stdout)")
    p_ccdf.add_argument("--method", default=None,
                        choices=[m.value for m in Method],
                        help="restrict to one method (header becomes x,ccdf)")
    p_ccdf.add_argument("--points", type=int, default=100, help="grid size")

    args = parser.parse_args(argv)
    if args.command == "run":
        return _run(args, require_sweep=False)
    if args.command == "sweep":
        return _run(args, require_sweep=True)
    return _ccdf(args)


if __name__ == "__main__":
    raise SystemExit(main())
