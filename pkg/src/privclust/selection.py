"""Server-side choice of clustering algorithm and hyper-parameters.

The server only ever sees a :class:`~privclust.ldp.NoisyDataset`. It picks
``k`` with the elbow rule, DBSCAN's ``eps`` from the k-distance curve and
``min_pts`` from the dimensionality, scores every candidate by silhouette and
Calinski-Harabasz, and keeps the highest-CH candidate whose silhouette lies
within ``alpha`` of the best silhouette.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import clustering as cl
from .errors import ParameterError, SelectionError, UndefinedMetricError
from .ldp import NoisyDataset
from .metrics import calinski_harabasz, silhouette

KINDS = ("kmeans", "hierarchical", "gmm", "dbscan")
DEFAULT_K_RANGE = (2, 12)
DEFAULT_ALPHA = 0.1
MAX_NOISE_FRACTION = 0.5


@dataclass(frozen=True)
class AlgorithmCandidate:
    kind: str
    k: int | None = None
    eps: float | None = None
    min_pts: int | None = None
    linkage: str = "ward"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown algorithm {self.kind!r}")
        if self.kind == "dbscan":
            cl.DBSCANParams(self.eps, self.min_pts)
        elif self.k is None or self.k < 1:
            raise ParameterError(f"{self.kind} needs k >= 1")

    @property
    def params(self) -> dict:
        if self.kind == "dbscan":
            return {"eps": self.eps, "min_pts": self.min_pts}
        if self.kind == "hierarchical":
            return {"k": self.k, "linkage": self.linkage}
        return {"k": self.k}

    def describe(self) -> str:
        if self.kind == "dbscan":
            return f"min_pts = {self.min_pts}, Eps = {self.eps:.4g}"
        return f"k = {self.k}"

    def run(self, data, seed: int = 0) -> cl.ClusterAssignment:
        if self.kind == "kmeans":
            return cl.kmeans(data, self.k, seed=seed).assignment
        if self.kind == "hierarchical":
            return cl.hierarchical(data, self.k, self.linkage)
        if self.kind == "gmm":
            return cl.gmm(data, self.k, seed=seed).assignment
        return cl.dbscan(data, cl.DBSCANParams(self.eps, self.min_pts))


@dataclass(frozen=True)
class ScoredCandidate:
    candidate: AlgorithmCandidate
    silhouette_score: float | None
    ch_index: float | None

    @property
    def scorable(self) -> bool:
        return self.silhouette_score is not None and self.ch_index is not None


@dataclass(frozen=True)
class Recommendation:
    best_algorithm: AlgorithmCandidate
    best_parameters: dict
    max_silhouette: float
    silhouette_threshold: float
    best_ch_index: float
    scored: tuple[ScoredCandidate, ...] = field(default=(), compare=False)

    def to_record(self) -> dict:
        """The payload sent back to the owners."""
        return {
            "algorithm": self.best_algorithm.kind,
            "params": self.best_parameters,
            "max_silhouette": self.max_silhouette,
            "threshold": self.silhouette_threshold,
            "best_ch_index": self.best_ch_index,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def knee_index(y) -> int:
    """Index of the point farthest below the chord joining the curve's endpoints.

    Works for decreasing (WCSS) and increasing (k-distance) convex curves.
    Only interior points qualify; ties, including a perfectly straight curve,
    go to the smallest index.
    """
    y = np.asarray(y, dtype=float)
    if len(y) < 3:
        raise ParameterError("knee detection needs at least 3 points")
    if not np.all(np.isfinite(y)):
        raise ParameterError("curve has non-finite values")
    span = y.max() - y.min()
    if span == 0:
        return 1
    t = np.linspace(0.0, 1.0, len(y))
    yn = (y - y.min()) / span
    chord = yn[0] + (yn[-1] - yn[0]) * t
    # perpendicular distance is the vertical gap times a per-curve constant
    gap = (chord - yn) / math.hypot(1.0, yn[-1] - yn[0])
    interior = gap[1:-1]
    best = interior.max()
    return 1 + int(np.flatnonzero(interior >= best - 1e-12)[0])


def _k_values(k_range, lo_min: int, hi_max: int) -> list[int]:
    lo, hi = int(k_range[0]), int(k_range[1])
    lo, hi = max(lo, lo_min), min(hi, hi_max)
    return list(range(lo, hi + 1))


def wcss_curve(data, ks, seed: int = 0) -> np.ndarray:
    x = cl._as_matrix(data)
    out = np.array([cl.kmeans(x, k, seed=seed).wcss for k in ks])
    if not np.all(np.isfinite(out)):
        raise ParameterError("non-finite WCSS")
    return out


def elbow_k(data, k_range=DEFAULT_K_RANGE, seed: int = 0) -> int:
    x = cl._as_matrix(data)
    ks = _k_values(k_range, 1, len(x))
    if len(ks) < 3:
        raise ParameterError(f"k_range {tuple(k_range)} leaves fewer than 3 values for n={len(x)}")
    return ks[knee_index(wcss_curve(x, ks, seed))]


def silhouette_k(data, k_range=DEFAULT_K_RANGE, seed: int = 0) -> int:
    x = cl._as_matrix(data)
    ks = _k_values(k_range, 2, len(x) - 1)
    if not ks:
        raise ParameterError(f"k_range {tuple(k_range)} is empty for n={len(x)}")
    scores = []
    for k in ks:
        try:
            scores.append(silhouette(x, cl.kmeans(x, k, seed=seed).assignment))
        except UndefinedMetricError:
            scores.append(-np.inf)
    return ks[int(np.argmax(scores))]


def k_distances(data, k: int) -> np.ndarray:
    """Distance from every row to its k-th nearest other row, sorted ascending."""
    x = cl._as_matrix(data)
    n = len(x)
    if not 1 <= k < n:
        raise ParameterError(f"need 1 <= k < n, got k={k}, n={n}")
    out = np.empty(n)
    for start in range(0, n, 1024):
        d = np.sqrt(cl.sq_distances(x[start:start + 1024], x))
        d[np.arange(len(d)), np.arange(start, start + len(d))] = np.inf
        out[start:start + len(d)] = np.partition(d, k - 1, axis=1)[:, k - 1]
    return np.sort(out)


def knn_eps(data, k: int) -> float:
    """DBSCAN radius read off the knee of the sorted k-distance curve.

    On heavily duplicated data the knee can sit on a zero distance; the
    smallest positive k-distance is returned instead.
    """
    dist = k_distances(data, k)
    if dist.max() == 0:
        raise ParameterError("all k-nearest-neighbour distances are zero")
    if len(dist) < 3:
        return float(dist[-1])
    eps = float(dist[knee_index(dist)])
    return eps if eps > 0 else float(dist[dist > 0][0])


def min_pts(dim: int, n: int) -> int:
    if dim < 1:
        raise ParameterError("dim must be >= 1")
    return max(1, min(max(4, 2 * dim), n - 1))


def score_candidate(data, candidate: AlgorithmCandidate, seed: int = 0) -> ScoredCandidate:
    """Silhouette and CH of one candidate; ``None`` scores mark it non-scorable.

    DBSCAN is non-scorable when it finds fewer than 2 clusters or labels more
    than half of the rows as noise.
    """
    x = cl._as_matrix(data)
    if candidate.kind != "dbscan" and candidate.k > len(x):
        return ScoredCandidate(candidate, None, None)
    assignment = candidate.run(x, seed)
    if assignment.k_effective < 2:
        return ScoredCandidate(candidate, None, None)
    if candidate.kind == "dbscan" and assignment.noise_fraction > MAX_NOISE_FRACTION:
        return ScoredCandidate(candidate, None, None)
    try:
        return ScoredCandidate(candidate, silhouette(x, assignment), calinski_harabasz(x, assignment))
    except UndefinedMetricError:
        return ScoredCandidate(candidate, None, None)


def choose(scored, alpha: float = DEFAULT_ALPHA) -> Recommendation:
    """Two passes over pre-scored candidates.

    Pass one finds the best silhouette. Pass two keeps, in list order, the
    candidate with the strictly greatest CH among those whose silhouette is
    within ``alpha`` of it.
    """
    if alpha < 0:
        raise ParameterError("alpha must be >= 0")
    scored = tuple(scored)
    usable = [s for s in scored if s.scorable]
    if not usable:
        raise SelectionError("no scorable candidate")
    max_sil = -math.inf
    for s in usable:
        if s.silhouette_score > max_sil:
            max_sil = s.silhouette_score
    threshold = max_sil - alpha
    best, best_ch = None, -math.inf
    for s in usable:
        if threshold <= s.silhouette_score <= max_sil and s.ch_index > best_ch:
            best, best_ch = s, s.ch_index
    return Recommendation(best.candidate, best.candidate.params, max_sil, threshold, best_ch, scored)


def select_best(data, candidates, alpha: float = DEFAULT_ALPHA, seed: int = 0) -> Recommendation:
    candidates = list(candidates)
    if not candidates:
        raise ParameterError("no candidates")
    return choose([score_candidate(data, c, seed) for c in candidates], alpha)


@dataclass(frozen=True)
class SelectionConfig:
    alpha: float = DEFAULT_ALPHA
    k_range: tuple[int, int] = DEFAULT_K_RANGE
    algorithms: tuple[str, ...] = KINDS
    linkage: str = "ward"
    standardize: bool = False
    dbscan_eps: float | None = None
    dbscan_min_pts: int | None = None


def server_view(noisy: NoisyDataset, standardize: bool = False) -> np.ndarray:
    """Real-valued matrix the server clusters (optionally z-scored per column)."""
    if not isinstance(noisy, NoisyDataset):
        raise TypeError("the server only accepts NoisyDataset input")
    if noisy.n == 0:
        raise ParameterError("empty noisy sample")
    x = noisy.decoded()
    if standardize and len(x) > 1:
        sd = x.std(0, ddof=0)
        x = (x - x.mean(0)) / np.where(sd > 0, sd, 1.0)
    return x


def candidate_grid(x: np.ndarray, config: SelectionConfig, seed: int = 0) -> list[AlgorithmCandidate]:
    """kmeans / hierarchical / gmm at the elbow k, dbscan at (k-distance knee, min_pts)."""
    out = []
    needs_k = any(a != "dbscan" for a in config.algorithms)
    k = elbow_k(x, config.k_range, seed) if needs_k else None
    for kind in KINDS:
        if kind not in config.algorithms:
            continue
        if kind == "dbscan":
            mp = config.dbscan_min_pts or min_pts(x.shape[1], len(x))
            eps = config.dbscan_eps if config.dbscan_eps is not None else knn_eps(x, mp)
            out.append(AlgorithmCandidate("dbscan", eps=eps, min_pts=mp))
        else:
            out.append(AlgorithmCandidate(kind, k=k, linkage=config.linkage))
    return out


def server_recommend(noisy: NoisyDataset, config: SelectionConfig = SelectionConfig(),
                     seed: int = 0) -> Recommendation:
    x = server_view(noisy, config.standardize)
    return select_best(x, candidate_grid(x, config, seed), config.alpha, seed)
