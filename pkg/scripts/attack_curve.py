"""Membership attack TPR at a fixed FPR across budgets, with a null baseline.

The null run shares rows from a group disjoint from the targets, so its TPR
should sit at the calibrated FPR.

    python scripts/attack_curve.py --seeds 50
"""

import argparse

from privclust import data as dm
from privclust import mia


def population(seed):
    centers = dm.separated_centers(3, 8, 4.0, 10.0, seed=seed)
    return dm.make_blobs(dm.BlobSpec(3, 200, 8, centers, 2.5, seed=seed))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epsilons", type=float, nargs="+", default=[0.1, 1.0, 5.0, 10.0])
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--group", type=int, default=150, help="case and control group size")
    ap.add_argument("--fpr", type=float, default=0.1)
    args = ap.parse_args()

    seeds = range(args.seeds)
    real = mia.attack_power(population, args.epsilons, args.group, args.group, args.fpr, seeds)
    null = mia.attack_power(population, args.epsilons, args.group, args.group, args.fpr, seeds, null=True)
    print(f"{'epsilon':>8} {'TPR':>7} {'FPR':>7} {'null TPR':>9}")
    for p, q in zip(real.points, null.points):
        print(f"{p.epsilon:8g} {p.tpr:7.3f} {p.fpr:7.3f} {q.tpr:9.3f}")
    count, drop = mia.count_inversions(list(real.tpr))
    print(f"inversions: {count} (largest drop {drop:.4f})")


if __name__ == "__main__":
    main()
