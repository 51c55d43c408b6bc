"""Online-vs-offline objective gap over horizons and seeds.

    python3 scripts/gap_decay.py --scenario scripts/scenarios/two_state.json \
        --horizons 100,1000,10000 --seeds 0,1,2 --out gaps.csv
"""
import argparse
import csv

import numpy as np

from varnum.metrics import gap_experiment
from varnum.scenario import load_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", required=True)
    ap.add_argument("--horizons", default="100,1000,10000")
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--out", default="gaps.csv")
    args = ap.parse_args()
    sc = load_scenario(args.scenario)
    horizons = [int(x) for x in args.horizons.split(",")]
    seeds = [int(x) for x in args.seeds.split(",")]
    table = np.empty((len(seeds), len(horizons)))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "T", "phi_avr", "phi_oracle", "gap"])
        for i, seed in enumerate(seeds):
            rep = gap_experiment(sc, horizons, seed)
            for j, (T, a, o, g) in enumerate(rep.rows()):
                w.writerow([seed, T, a, o, g])
                table[i, j] = g
    for j, T in enumerate(horizons):
        col = table[:, j]
        print(f"T={T:>7d}  mean gap {col.mean():.3e}  min {col.min():.3e}  max {col.max():.3e}")


if __name__ == "__main__":
    main()
