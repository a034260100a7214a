"""External and internal cluster validity metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .clustering import NOISE, ClusterAssignment, _as_matrix, sq_distances
from .errors import UndefinedMetricError


@dataclass(frozen=True)
class MetricReport:
    ari: float
    silhouette: float
    ch: float
    homogeneity: float
    completeness: float
    accuracy_raw: float
    accuracy_mapped: float

    def as_dict(self) -> dict:
        return asdict(self)


def _labels(x) -> np.ndarray:
    if isinstance(x, ClusterAssignment):
        return x.labels
    return np.asarray(x)


def contingency(truth, pred) -> np.ndarray:
    truth, pred = _labels(truth), _labels(pred)
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {pred.shape}")
    _, ti = np.unique(truth, return_inverse=True)
    _, pi = np.unique(pred, return_inverse=True)
    table = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(table, (ti, pi), 1)
    return table


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1) / 2.0


def ari(truth, pred) -> float:
    """Hubert-Arabie adjusted Rand index from the contingency table."""
    table = contingency(truth, pred)
    n = table.sum()
    if n < 2:
        raise ValueError("ARI needs at least 2 rows")
    sum_ij = _comb2(table).sum()
    sum_a = _comb2(table.sum(1)).sum()
    sum_b = _comb2(table.sum(0)).sum()
    expected = sum_a * sum_b / _comb2(n)
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        # both partitions trivial in the same way (all-in-one or all singletons)
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def _scored(data, assignment):
    x = _as_matrix(data)
    labels = _labels(assignment)
    if len(labels) != len(x):
        raise ValueError("assignment length does not match data")
    keep = labels != NOISE
    return x[keep], labels[keep]


def silhouette_samples(data, assignment, chunk: int = 2048) -> np.ndarray:
    """Per-row silhouette of the non-noise rows (singleton clusters score 0)."""
    x, labels = _scored(data, assignment)
    uniq, lab = np.unique(labels, return_inverse=True)
    k = len(uniq)
    if k < 2:
        raise UndefinedMetricError(f"silhouette needs >= 2 clusters, got {k}")
    counts = np.bincount(lab, minlength=k).astype(float)
    onehot = np.zeros((len(x), k))
    onehot[np.arange(len(x)), lab] = 1.0
    out = np.empty(len(x))
    for start in range(0, len(x), chunk):
        d = np.sqrt(sq_distances(x[start:start + chunk], x))
        sums = d @ onehot
        own = lab[start:start + chunk]
        rows = np.arange(len(own))
        own_n = counts[own]
        with np.errstate(invalid="ignore", divide="ignore"):
            a = sums[rows, own] / (own_n - 1)
            means = sums / counts
        means[rows, own] = np.inf
        b = means.min(1)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(denom > 0, (b - a) / denom, 0.0)
        s[own_n == 1] = 0.0
        out[start:start + chunk] = s
    return out


def silhouette(data, assignment) -> float:
    return float(silhouette_samples(data, assignment).mean())


def calinski_harabasz(data, assignment) -> float:
    """Between/within dispersion ratio on the non-noise rows."""
    x, labels = _scored(data, assignment)
    uniq, lab = np.unique(labels, return_inverse=True)
    k, n = len(uniq), len(x)
    if not 2 <= k < n:
        raise UndefinedMetricError(f"CH needs 2 <= k < n, got k={k}, n={n}")
    mean = x.mean(0)
    tr_b = tr_w = 0.0
    for c in range(k):
        pts = x[lab == c]
        mu = pts.mean(0)
        tr_b += len(pts) * ((mu - mean) ** 2).sum()
        tr_w += ((pts - mu) ** 2).sum()
    if tr_w == 0:
        raise UndefinedMetricError("within-cluster scatter is zero")
    return float((tr_b / (k - 1)) / (tr_w / (n - k)))


def _entropy(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts > 0]
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def homogeneity_completeness(truth, pred) -> tuple[float, float]:
    table = contingency(truth, pred).astype(float)
    n = table.sum()
    h_c = _entropy(table.sum(1))
    h_k = _entropy(table.sum(0))
    nz = table > 0
    # H(C|K) and H(K|C)
    col = np.broadcast_to(table.sum(0), table.shape)
    row = np.broadcast_to(table.sum(1)[:, None], table.shape)
    h_c_given_k = float(-(table[nz] / n * np.log(table[nz] / col[nz])).sum())
    h_k_given_c = float(-(table[nz] / n * np.log(table[nz] / row[nz])).sum())
    homo = 1.0 if h_c == 0 else 1.0 - h_c_given_k / h_c
    comp = 1.0 if h_k == 0 else 1.0 - h_k_given_c / h_k
    return float(np.clip(homo, 0, 1)), float(np.clip(comp, 0, 1))


def accuracy(truth, pred, mapped: bool = False) -> float:
    """Fraction of rows whose predicted id matches the class.

    With ``mapped`` the cluster-to-class assignment maximizing total matches
    is applied first (one class per cluster, noise never matches).
    """
    truth, pred = _labels(truth), _labels(pred)
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {pred.shape}")
    if len(truth) == 0:
        return 0.0
    if not mapped:
        return float(np.mean(truth == pred))
    keep = pred != NOISE
    if not keep.any():
        return 0.0
    classes, ti = np.unique(truth[keep], return_inverse=True)
    clusters, pi = np.unique(pred[keep], return_inverse=True)
    table = np.zeros((len(clusters), len(classes)))
    np.add.at(table, (pi, ti), 1)
    r, c = linear_sum_assignment(table, maximize=True)
    return float(table[r, c].sum() / len(truth))


def evaluate(data, truth, assignment) -> MetricReport:
    """Full report; internal indices are NaN when undefined for the assignment."""
    try:
        sil = silhouette(data, assignment)
    except UndefinedMetricError:
        sil = float("nan")
    try:
        ch = calinski_harabasz(data, assignment)
    except UndefinedMetricError:
        ch = float("nan")
    pred = _labels(assignment)
    homo, comp = homogeneity_completeness(truth, pred)
    return MetricReport(
        ari=ari(truth, pred),
        silhouette=sil,
        ch=ch,
        homogeneity=homo,
        completeness=comp,
        accuracy_raw=accuracy(truth, pred),
        accuracy_mapped=accuracy(truth, pred, mapped=True),
    )
