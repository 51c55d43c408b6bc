"""Expected slot value E[h] along the Euler path of the mean-field drift.

    python3 scripts/lyapunov_trace.py --scenario scripts/scenarios/mixed_wnt.json
"""
import argparse

import numpy as np

from varnum.scenario import load_scenario
from varnum.slot import Theta
from varnum.stationary import lyapunov_descent_check


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", required=True)
    ap.add_argument("--step", type=float, default=1e-2)
    ap.add_argument("--every", type=int, default=100)
    args = ap.parse_args()
    sc = load_scenario(args.scenario)
    n = sc.n_users
    rep = lyapunov_descent_check(sc, Theta(np.full(n, sc.r_min), np.zeros(n)), step=args.step)
    for k in range(0, len(rep.expected_h), args.every):
        print(f"{k:>7d}  E[h] = {rep.expected_h[k]:.12f}")
    print(("PASS" if rep.passed else "FAIL") + ": " + rep.detail)


if __name__ == "__main__":
    main()
