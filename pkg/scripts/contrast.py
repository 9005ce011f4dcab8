"""Amenable vs expander: level-graph gaps of an irrational rotation next to the SL2 Schreier family."""

import argparse

from warpcone.actions import rotation_action
from warpcone.spaces import torus_grid
from warpcone.spectral import (
    cycle_graph,
    distortion_lower_bound,
    level_graph,
    load_baselines,
    primes_between,
    schreier_family,
    spectral_gap,
)
from warpcone.warp import build_warped_level

GOLDEN = (5**0.5 - 1) / 2


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", type=int, nargs="+", default=[8, 16, 32, 64])
    ap.add_argument("--primes", type=int, nargs=2, default=[3, 47])
    args = ap.parse_args()

    print("rotation level graphs (r points, level r)")
    for r in args.levels:
        act = rotation_action(torus_grid(r), [GOLDEN])
        g = level_graph(build_warped_level(act, r))
        print(f"  r={r:4d}  lambda1_norm={spectral_gap(g).lambda1_norm:.5f}  d_lb={distortion_lower_bound(g):.4f}")

    base = load_baselines()
    print(f"SL2 Schreier family (stored floor {base['schreier_floor']:.6f})")
    for rep in schreier_family(primes_between(*args.primes)):
        print(f"  n={rep.n:3d}  |V|={rep.vertex_count:5d}  lambda1_norm={rep.lambda1_norm:.5f}  d_lb={rep.d_lb:.4f}")

    print("cycle control")
    for n in (8, 16, 32, 64, 128):
        print(f"  C_{n:<4d} d_lb={distortion_lower_bound(cycle_graph(n)):.4f}")


if __name__ == "__main__":
    main()
