"""Coincidence rate against symmetric per-side transmittance; fitted log-log exponent.

Writes the sweep reports and a combined CSV to --out-dir.
"""

import argparse
from pathlib import Path

import numpy as np

from icqkd.analysis import fit_scaling_exponent
from icqkd.cli import run_sweep
from icqkd.config import SessionConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-c", type=float, default=0.1)
    ap.add_argument("--rounds", type=int, default=1_000_000)
    ap.add_argument("--tmin", type=float, default=0.05)
    ap.add_argument("--tmax", type=float, default=0.5)
    ap.add_argument("--out-dir", type=Path, default=Path("results/distance_scaling"))
    args = ap.parse_args()
    ts = np.logspace(np.log10(args.tmin), np.log10(args.tmax), 5).round(6).tolist()
    base = SessionConfig(n_c=args.n_c, rounds=args.rounds, seed=2)
    res = run_sweep(base, "transmittance", ts, args.out_dir)
    co = [s.coincident for s in res.stats]
    for t, c in zip(ts, co):
        print(f"t = {t:.4f}  coincidence rate = {c / args.rounds:.3e}")
    print(f"fitted exponent: {fit_scaling_exponent(ts, np.array(co) / args.rounds, counts=co):.3f}")
    print(f"reports in {args.out_dir}")


if __name__ == "__main__":
    main()
