"""Run every scenario in configs/ and merge the outputs into a report."""

import argparse
import sys
import time
from pathlib import Path

from warpcone.harness import load_scenario, report, run_scenario

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--configs", type=Path, default=ROOT / "configs")
    ap.add_argument("--out", type=Path, default=ROOT / "runs")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    failed = 0
    for cfg in sorted(args.configs.glob("*.ini")):
        t0 = time.perf_counter()
        res = run_scenario(load_scenario(cfg), args.out, seed=args.seed)
        print(f"{cfg.stem:28s} {res.status:4s} {time.perf_counter() - t0:6.1f}s  {res.message}")
        failed += res.status != "pass"
    s, l = report(args.out)
    print(f"summary: {s}\nlong:    {l}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
