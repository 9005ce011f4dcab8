"""Recompute the committed spectral baselines (run once; results live in src/warpcone/data)."""

import argparse
import json
from pathlib import Path

from warpcone.spectral import cycle_graph, distortion_lower_bound, primes_between, schreier_family

OUT = Path(__file__).resolve().parents[1] / "src" / "warpcone" / "data" / "baselines.json"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lo", type=int, default=3)
    ap.add_argument("--hi", type=int, default=47)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    reps = schreier_family(primes_between(args.lo, args.hi))
    data = {
        "schreier_primes": [args.lo, args.hi],
        "schreier_floor": reps[0].family_floor,
        "schreier_lambda1_norm": {str(r.n): r.lambda1_norm for r in reps},
        "schreier_d_lb": {str(r.n): r.d_lb for r in reps},
        "cycle_d_lb": {str(n): distortion_lower_bound(cycle_graph(n)) for n in (8, 16, 32, 64, 128)},
    }
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    print(f"floor {data['schreier_floor']:.6f} -> {args.out}")


if __name__ == "__main__":
    main()
