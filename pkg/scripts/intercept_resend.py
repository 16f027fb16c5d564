"""How fast the error check catches intercept-resend Eve as the disclosed sample grows."""

import argparse

from icqkd import theory
from icqkd.adversary import EveKind, EveStrategy, ResendPolicy
from icqkd.analysis import session_stats
from icqkd.config import SessionConfig, with_overrides
from icqkd.session import run_session


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sessions", type=int, default=50)
    ap.add_argument("--n-c", type=float, default=0.1)
    args = ap.parse_args()
    for policy in ResendPolicy:
        base = SessionConfig(n_c=args.n_c, rounds=1000, alpha_eta_intact=False, error_check_fraction=0.5,
                             eve=EveStrategy(EveKind.INTERCEPT_RESEND, resend_policy=policy))
        print(f"\n{policy.value}: expected error per coincidence "
              f"{theory.intercept_resend_expectation(base).qber:.4f}")
        print(f"{'rounds':>8} {'disclosed':>10} {'abort freq':>11}")
        for rounds in (500, 1000, 2000, 4000, 16000):
            stats = [session_stats(run_session(with_overrides(base, rounds=rounds, seed=s)))
                     for s in range(args.sessions)]
            disclosed = sum(s.disclosed for s in stats) / len(stats)
            freq = sum(s.eve_detection for s in stats) / len(stats)
            print(f"{rounds:8d} {disclosed:10.1f} {freq:11.2f}")


if __name__ == "__main__":
    main()
