"""Silhouette of perturbed points under their original labels, per budget.

Also compares the elbow k the server derives from a 10% noisy sample with
the elbow k of the clean data.

    python scripts/gap_preservation.py --epsilons 1 5 10 20
"""

import argparse

import numpy as np

from privclust import clustering as cl
from privclust import data as dm
from privclust import ldp, metrics, selection
from privclust.protocol import owner_prepare


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epsilons", type=float, nargs="+", default=[1.0, 5.0, 10.0, 20.0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--bins", type=int, default=10)
    args = ap.parse_args()

    centers = np.array([[0.0, 0.0], [10.0, 10.0]])
    k_range = (1, 12)
    print(f"{'epsilon':>8} {'silhouette':>11} {'server k':>16} {'clean k':>8}")
    for eps in args.epsilons:
        sils, ks, clean = [], [], []
        for seed in range(args.seeds):
            d = dm.make_blobs(dm.BlobSpec(2, 200, 2, centers, 1.0, seed=seed))
            disc = ldp.discretize(d, args.bins)
            nd = ldp.perturb_dataset(disc.without_labels(), eps, seed)
            sils.append(metrics.silhouette(nd.decoded(), cl.ClusterAssignment.from_labels(d.labels)))
            shared = owner_prepare(disc.without_labels(), eps, 0.1, seed).shared
            ks.append(selection.elbow_k(selection.server_view(shared), k_range))
            clean.append(selection.elbow_k(d.rows, k_range))
        print(f"{eps:8g} {np.mean(sils):11.3f} {str(ks):>16} {str(sorted(set(clean))):>8}")


if __name__ == "__main__":
    main()
