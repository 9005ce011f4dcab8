"""``warpcone <experiment> --config FILE [--out DIR] [--seed N] [--cap N]`` and ``warpcone report``."""

from __future__ import annotations

import argparse
import sys

from .actions import BallCapExceeded
from .harness import EXPERIMENTS, ConfigError, load_scenario, report, run_scenario
from .warp import CapExceeded


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="warpcone", description="Desk-scale warped cone experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for exp in EXPERIMENTS:
        p = sub.add_parser(exp, help=f"run a {exp} scenario")
        p.add_argument("--config", required=True, help="scenario INI file")
        p.add_argument("--out", default="runs", help="output directory (default: runs)")
        p.add_argument("--seed", type=int, default=None, help="override scenario.seed")
        p.add_argument("--cap", type=int, default=None, help="vertex/ball cap")
    rp = sub.add_parser("report", help="merge scenario CSVs into summary and long-format tables")
    rp.add_argument("--out", default="runs")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.command == "report":
        s, l = report(args.out)
        print(f"wrote {s} and {l}")
        return 0
    try:
        scen = load_scenario(args.config)
        if scen.experiment != args.command:
            raise ConfigError(f"scenario.experiment is {scen.experiment!r} but subcommand is {args.command!r}")
        res = run_scenario(scen, args.out, seed=args.seed, cap=args.cap)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CapExceeded, BallCapExceeded) as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return 2
    print(f"{scen.name}: {res.status} -> {res.csv_path}")
    if res.status != "pass":
        print(res.message, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
