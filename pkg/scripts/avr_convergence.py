"""Distance of the online statistics from the stationary optimum as T grows.

    python3 scripts/avr_convergence.py --scenario scripts/scenarios/mixed_wnt.json
"""
import argparse

import numpy as np

from varnum.avr import run_avr
from varnum.scenario import load_scenario
from varnum.stationary import solve_optstat_direct


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", required=True)
    ap.add_argument("--horizon", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--stride", type=int, default=1000)
    args = ap.parse_args()
    sc = load_scenario(args.scenario)
    opt = solve_optstat_direct(sc)
    trace = run_avr(sc, args.horizon, args.seed, stride=args.stride)
    nl = sc.nonlinear_mask
    print(f"stationary optimum: m = {opt.m_pi}, v = {opt.v_pi}")
    print(f"{'t':>8}  {'|m_hat - m_pi|':>14}  {'|v_track - v_pi|':>16}")
    for t, m, v in zip(trace.snapshot_t, trace.snapshot_m, trace.snapshot_v_track):
        if t == 0:
            continue
        print(f"{t:>8d}  {np.max(np.abs(m - opt.m_pi)):>14.3e}  {np.max(np.abs(v - opt.v_pi)):>16.3e}")
    if nl.any():
        print(f"nonlinear-penalty users: final v_hat = {trace.v_hat[nl]}, v_pi = {opt.v_pi[nl]}")


if __name__ == "__main__":
    main()
