"""Photon-number-splitting: stolen-round fraction and leaked share of coincidences against n_c."""

import argparse

from icqkd import theory
from icqkd.adversary import EveKind, EveStrategy
from icqkd.analysis import session_stats
from icqkd.config import SessionConfig
from icqkd.session import run_session


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rounds", type=int, default=500_000)
    args = ap.parse_args()
    print(f"{'n_c':>5} {'stolen':>8} {'P(k>=2)':>8} {'leak':>8} {'leak oracle':>11} {'qber':>6}")
    for n_c in (0.02, 0.05, 0.1, 0.2, 0.4):
        config = SessionConfig(n_c=n_c, rounds=args.rounds, seed=3, eve=EveStrategy(EveKind.PNS))
        s = session_stats(run_session(config))
        print(f"{n_c:5.2f} {s.pns_stolen_fraction:8.5f} {theory.multiphoton_probability(2 * n_c):8.5f} "
              f"{s.pns_leak_fraction:8.5f} {theory.pns_stolen_coincident_fraction(config):11.5f} {s.qber:6.3f}")


if __name__ == "__main__":
    main()
