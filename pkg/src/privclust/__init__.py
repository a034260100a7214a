"""Privacy-preserving selection of clustering algorithms across data owners.

Owners perturb their records with generalized randomized response and share a
fraction of the noisy rows. A semi-honest server recommends an algorithm and
its hyper-parameters from that sample alone, and a membership-inference
harness measures what the shared rows leak.
"""

__version__ = "0.1.0"

from .clustering import ClusterAssignment, dbscan, gmm, hierarchical, kmeans
from .data import BlobSpec, Dataset, FeatureSchema, ingest_csv, make_blobs, partition, standardize
from .ldp import NoisyDataset, discretize, estimate_frequencies, perturb_dataset, rr_params
from .metrics import MetricReport, ari, calinski_harabasz, evaluate, silhouette
from .mia import AttackCurve, attack_power
from .protocol import run_protocol
from .selection import AlgorithmCandidate, Recommendation, elbow_k, select_best, server_recommend, silhouette_k

__all__ = [
    "AlgorithmCandidate", "AttackCurve", "BlobSpec", "ClusterAssignment", "Dataset", "FeatureSchema",
    "MetricReport", "NoisyDataset", "Recommendation", "ari", "attack_power", "calinski_harabasz",
    "dbscan", "discretize", "elbow_k", "estimate_frequencies", "evaluate", "gmm", "hierarchical",
    "ingest_csv", "kmeans", "make_blobs", "partition", "perturb_dataset", "rr_params", "run_protocol",
    "select_best", "server_recommend", "silhouette", "silhouette_k", "standardize",
]
