"""QBER caused by unequal mode means n_x != n_y at fixed total, simulated and enumerated."""

import argparse
import math

import numpy as np

from icqkd import theory
from icqkd.analysis import mismatch_penalty
from icqkd.config import SessionConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=500_000)
    ap.add_argument("--total", type=float, default=0.25)
    args = ap.parse_args()
    rng = np.random.default_rng(4)
    print(f"{'n_x':>6} {'n_y':>6} {'dark mean':>10} {'simulated':>10} {'closed form':>11}")
    for d in (0.0, 0.01, 0.035, 0.06, 0.09):
        nx, ny = args.total / 2 - d, args.total / 2 + d
        config = SessionConfig(n_c=args.total / 2, rounds=1, n_x=nx, n_y=ny)
        sim = mismatch_penalty(nx, ny, args.samples, rng)
        print(f"{nx:6.3f} {ny:6.3f} {0.5 * (math.sqrt(nx) - math.sqrt(ny)) ** 2:10.5f} "
              f"{sim:10.5f} {theory.honest_expectation(config).qber:11.5f}")


if __name__ == "__main__":
    main()
