"""How often the elbow and silhouette rules recover k on perturbed blobs.

Prints, per budget, the fraction of seeds where each rule lands within one of
the true k, plus the raw k lists.

    python scripts/elbow_vs_silhouette.py --seeds 20 --epsilons 0.1 1 5
"""

import argparse

import numpy as np

from privclust import data as dm
from privclust import ldp, selection
from privclust.protocol import derive_seed


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epsilons", type=float, nargs="+", default=[0.1, 1.0, 5.0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--k", type=int, default=7)
    ap.add_argument("--n-per", type=int, default=300)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--gap", type=float, default=10.0)
    ap.add_argument("--bins", type=int, default=10)
    args = ap.parse_args()

    centers = dm.simplex_centers(args.k, args.dim, args.gap)
    print(f"{'epsilon':>8} {'elbow hit':>10} {'silh hit':>10}  elbow ks | silhouette ks")
    for eps in args.epsilons:
        elbow, silh = [], []
        for seed in range(args.seeds):
            d = dm.make_blobs(dm.BlobSpec(args.k, args.n_per, args.dim, centers, 1.0, seed=seed))
            nd = ldp.perturb_dataset(ldp.discretize(d, args.bins).without_labels(), eps, derive_seed(seed, 5))
            x = selection.server_view(nd)
            elbow.append(selection.elbow_k(x, seed=seed))
            silh.append(selection.silhouette_k(x, seed=seed))
        hit = lambda ks: np.mean([abs(k - args.k) <= 1 for k in ks])
        print(f"{eps:8g} {hit(elbow):10.2f} {hit(silh):10.2f}  {elbow} | {silh}")


if __name__ == "__main__":
    main()
