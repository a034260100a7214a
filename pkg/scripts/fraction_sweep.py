"""Recommended algorithm and final ARI over a budget x share-fraction grid.

Two owners split seven equidistant blobs; each cell reports the most common
recommendation across seeds, how many seeds agreed and the mean ARI.

    python scripts/fraction_sweep.py --seeds 10
"""

import argparse
from collections import Counter

import numpy as np

from privclust import data as dm
from privclust import protocol as pr


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epsilons", type=float, nargs="+", default=[0.1, 1.0, 5.0])
    ap.add_argument("--fractions", type=float, nargs="+", default=[0.1, 0.3, 0.5])
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()

    centers = dm.simplex_centers(7, 8, 10.0)
    print(f"{'epsilon':>8} {'f':>5}  {'recommendation':<22} {'agree':>6} {'mean ARI':>9}")
    for eps in args.epsilons:
        for f in args.fractions:
            recs, aris = Counter(), []
            for seed in range(args.seeds):
                d = dm.make_blobs(dm.BlobSpec(7, 300, 8, centers, 1.0, seed=seed))
                owners = dm.partition(d, [0.5, 0.5], seed=seed)
                rep = pr.run_protocol(owners, eps, f, seed=seed, evaluate_all=False)
                best = rep.recommendation.best_algorithm
                recs[f"{best.kind} ({best.describe()})"] += 1
                aris.append(rep.metrics.ari)
            top, count = recs.most_common(1)[0]
            print(f"{eps:8g} {f:5g}  {top:<22} {count:>3}/{args.seeds:<2} {np.mean(aris):9.3f}")


if __name__ == "__main__":
    main()
