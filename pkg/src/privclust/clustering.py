"""K-Means, agglomerative hierarchical clustering, Gaussian mixtures and DBSCAN.

All four use Euclidean distance and are deterministic for a fixed seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .errors import ParameterError

log = logging.getLogger(__name__)

NOISE = -1
LINKAGES = ("single", "complete", "average", "ward")


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """Per-row cluster ids; ``NOISE`` (-1) marks DBSCAN outliers.

    Construct through :meth:`from_labels` to get contiguous ids numbered in
    order of first appearance.
    """

    labels: np.ndarray
    k_effective: int

    @classmethod
    def from_labels(cls, raw) -> "ClusterAssignment":
        raw = np.asarray(raw)
        out = np.full(raw.shape, NOISE, dtype=np.int64)
        mapping: dict = {}
        for i, lab in enumerate(raw.tolist()):
            if lab == NOISE:
                continue
            out[i] = mapping.setdefault(lab, len(mapping))
        out.setflags(write=False)
        return cls(out, len(mapping))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def noise_fraction(self) -> float:
        return float(np.mean(self.labels == NOISE)) if self.n else 0.0


@dataclass(frozen=True, eq=False)
class KMeansResult:
    assignment: ClusterAssignment
    centroids: np.ndarray
    wcss: float
    iterations: int
    wcss_trace: list[float] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class GMMResult:
    assignment: ClusterAssignment
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: list[float]
    converged: bool


@dataclass(frozen=True)
class DBSCANParams:
    eps: float
    min_pts: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ParameterError(f"eps must be > 0, got {self.eps}")
        if self.min_pts < 1:
            raise ParameterError(f"min_pts must be >= 1, got {self.min_pts}")


def _as_matrix(data) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ParameterError("data must be a 2-D matrix")
    return x


def _check_k(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")


def sq_distances(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    # explicit differences: exact zeros for duplicate rows, unlike the dot-product expansion
    return cdist(x, c, "sqeuclidean")


def pairwise_distances(x: np.ndarray) -> np.ndarray:
    return np.sqrt(sq_distances(x, x))


# --------------------------------------------------------------------------- K-Means

def kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++ seeding: each round draws several D^2-weighted
    candidates and keeps the one that lowers the potential most."""
    n = len(x)
    trials = 2 + int(np.log(k))
    centers = [int(rng.integers(n))]
    closest = sq_distances(x, x[centers])[:, 0]
    for _ in range(1, k):
        pot = closest.sum()
        if pot <= 0:
            # every point coincides with a center; fall back to unused rows
            unused = np.setdiff1d(np.arange(n), centers)
            centers.append(int(rng.choice(unused)))
            closest = np.minimum(closest, sq_distances(x, x[centers[-1:]])[:, 0])
            continue
        cand = np.searchsorted(np.cumsum(closest), rng.random(trials) * pot)
        cand = np.minimum(cand, n - 1)
        cand_d = np.minimum(closest[:, None], sq_distances(x, x[cand]))
        best = int(np.argmin(cand_d.sum(0)))
        centers.append(int(cand[best]))
        closest = cand_d[:, best]
    return x[centers].copy()


def _means(x, labels, k, centroids):
    new = np.empty_like(centroids)
    counts = np.bincount(labels, minlength=k)
    for c in range(k):
        new[c] = x[labels == c].mean(0) if counts[c] else centroids[c]
    return new, counts


def kmeans(data, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-6) -> KMeansResult:
    """Lloyd's algorithm from greedy k-means++ seeds.

    Iterates until the assignment stops changing, the largest centroid shift
    drops below ``tol``, or ``max_iter`` rounds. Empty clusters are re-seeded
    at the point currently farthest from its centroid.
    """
    x = _as_matrix(data)
    n = len(x)
    _check_k(k, n)
    rng = np.random.default_rng(seed)
    centroids = kmeans_pp_init(x, k, rng)
    dist = sq_distances(x, centroids)
    labels = dist.argmin(1)
    trace = [float(dist[np.arange(n), labels].sum())]
    it = 0
    for it in range(1, max_iter + 1):
        new, counts = _means(x, labels, k, centroids)
        for c in np.flatnonzero(counts == 0):
            d_own = sq_distances(x, new)[np.arange(n), labels]
            far = int(np.argmax(d_own))
            new[c] = x[far]
            labels = labels.copy()
            labels[far] = c
            log.debug("kmeans: re-seeded empty cluster %d at row %d", c, far)
        shift = float(np.sqrt(((new - centroids) ** 2).sum(1)).max())
        centroids = new
        dist = sq_distances(x, centroids)
        new_labels = dist.argmin(1)
        trace.append(float(dist[np.arange(n), new_labels].sum()))
        stable = np.array_equal(new_labels, labels)
        labels = new_labels
        if stable or shift < tol:
            break
    # final centroids are exact means of the final assignment
    centroids, counts = _means(x, labels, k, centroids)
    wcss = float(((x - centroids[labels]) ** 2).sum())
    if wcss < trace[-1]:
        trace.append(wcss)
    else:
        wcss = trace[-1]
    assignment = ClusterAssignment.from_labels(labels)
    # reorder centroids to match the canonical label numbering
    order = [int(labels[np.argmax(assignment.labels == c)]) for c in range(assignment.k_effective)]
    return KMeansResult(assignment, centroids[order], wcss, it, trace)


# --------------------------------------------------------------------------- hierarchical

def _lance_williams(method, d_ik, d_jk, d_ij, n_i, n_j, n_k):
    if method == "single":
        return np.minimum(d_ik, d_jk)
    if method == "complete":
        return np.maximum(d_ik, d_jk)
    if method == "average":
        return (n_i * d_ik + n_j * d_jk) / (n_i + n_j)
    t = n_i + n_j + n_k
    val = ((n_i + n_k) * d_ik ** 2 + (n_j + n_k) * d_jk ** 2 - n_k * d_ij ** 2) / t
    return np.sqrt(np.maximum(val, 0.0))


def merge_tree(data, linkage: str = "ward") -> np.ndarray:
    """Full agglomerative merge sequence via the nearest-neighbour chain.

    Returns:
        ``(n-1) x 3`` array of ``(row_a, row_b, height)`` sorted by height. A
        row index stands for the cluster containing it at merge time.
    """
    if linkage not in LINKAGES:
        raise ParameterError(f"unknown linkage {linkage!r}; choose from {LINKAGES}")
    x = _as_matrix(data)
    n = len(x)
    dist = pairwise_distances(x)
    np.fill_diagonal(dist, np.inf)
    size = np.ones(n)
    active = np.ones(n, dtype=bool)
    merges = []
    chain: list[int] = []
    remaining = n
    while remaining > 1:
        if not chain:
            chain.append(int(np.flatnonzero(active)[0]))
        a = chain[-1]
        row = dist[a]
        b = int(np.argmin(row))
        if len(chain) > 1 and row[chain[-2]] <= row[b]:
            b = chain[-2]
        if len(chain) > 1 and b == chain[-2]:
            chain.pop()
            chain.pop()
            h = dist[a, b]
            i, j = min(a, b), max(a, b)
            merges.append((i, j, h))
            others = active.copy()
            others[[i, j]] = False
            upd = _lance_williams(linkage, dist[i, others], dist[j, others], h, size[i], size[j], size[others])
            dist[i, others] = upd
            dist[others, i] = upd
            dist[j, :] = np.inf
            dist[:, j] = np.inf
            size[i] += size[j]
            active[j] = False
            remaining -= 1
        else:
            chain.append(b)
    tree = np.array(merges, dtype=float).reshape(-1, 3)
    # execution index breaks ties so children always precede parents
    order = np.lexsort((np.arange(len(tree)), tree[:, 2]))
    return tree[order]


def cut_tree(tree: np.ndarray, n: int, k: int) -> np.ndarray:
    """Apply the first ``n - k`` merges; returns raw cluster representatives per row."""
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b, _ in tree[: n - k]:
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return np.array([find(i) for i in range(n)])


def hierarchical(data, k: int, linkage: str = "ward") -> ClusterAssignment:
    """Agglomerative clustering cut at ``k`` clusters."""
    x = _as_matrix(data)
    _check_k(k, len(x))
    tree = merge_tree(x, linkage)
    return ClusterAssignment.from_labels(cut_tree(tree, len(x), k))


# --------------------------------------------------------------------------- GMM

def _log_gauss(x, mean, cov):
    d = x.shape[1]
    chol = np.linalg.cholesky(cov)
    z = np.linalg.solve(chol, (x - mean).T)
    log_det = 2.0 * np.log(np.diag(chol)).sum()
    return -0.5 * (d * np.log(2 * np.pi) + log_det + (z * z).sum(0))


def _log_resp(x, weights, means, covs):
    with np.errstate(divide="ignore"):
        lw = np.log(weights)
    return np.column_stack([lw[c] + _log_gauss(x, means[c], covs[c]) for c in range(len(weights))])


def gmm(data, k: int, seed: int = 0, max_iter: int = 200, tol: float = 1e-6, reg: float = 1e-6) -> GMMResult:
    """Full-covariance Gaussian mixture fitted by EM from k-means means.

    Every covariance gets ``reg * I`` added in the M-step. A component whose
    responsibility mass vanishes is re-seeded at the worst-explained point.
    EM stops once the log-likelihood gain drops below ``tol``; a step that
    would lower the likelihood is discarded, so the recorded trace never
    decreases.
    """
    if reg <= 0:
        raise ParameterError("reg must be > 0")
    x = _as_matrix(data)
    n, d = x.shape
    _check_k(k, n)
    eye = np.eye(d)
    init = kmeans(x, k, seed=seed)
    lab = init.assignment.labels
    means = np.array(init.centroids, dtype=float)
    kk = len(means)
    weights = np.bincount(lab, minlength=kk) / n
    glob_cov = np.atleast_2d(np.cov(x.T, bias=True)) if n > 1 else np.zeros((d, d))
    covs = np.empty((kk, d, d))
    for c in range(kk):
        pts = x[lab == c]
        covs[c] = (np.atleast_2d(np.cov(pts.T, bias=True)) if len(pts) > 1 else glob_cov) + reg * eye

    def loglik(w, mu, cv):
        lr = _log_resp(x, w, mu, cv)
        norm = logsumexp(lr, axis=1)
        return lr, norm, float(norm.sum())

    lr, norm, ll = loglik(weights, means, covs)
    trace = [ll]
    converged = False
    for _ in range(max_iter):
        resp = np.exp(lr - norm[:, None])
        nk = resp.sum(0)
        new_w = nk / n
        new_mu = np.empty_like(means)
        new_cv = np.empty_like(covs)
        for c in range(kk):
            if nk[c] < 10 * np.finfo(float).eps:
                far = int(np.argmin(norm))
                log.warning("gmm: component %d lost all mass; re-seeding at row %d", c, far)
                new_mu[c] = x[far]
                new_cv[c] = glob_cov + reg * eye
                new_w[c] = 1.0 / n
                continue
            new_mu[c] = resp[:, c] @ x / nk[c]
            diff = x - new_mu[c]
            new_cv[c] = (resp[:, c, None] * diff).T @ diff / nk[c] + reg * eye
        new_w = new_w / new_w.sum()
        new_lr, new_norm, new_ll = loglik(new_w, new_mu, new_cv)
        if new_ll < ll:
            converged = True
            break
        gain = new_ll - ll
        weights, means, covs, lr, norm, ll = new_w, new_mu, new_cv, new_lr, new_norm, new_ll
        trace.append(ll)
        if gain < tol:
            converged = True
            break
    assignment = ClusterAssignment.from_labels(lr.argmax(1))
    return GMMResult(assignment, weights, means, covs, trace, converged)


# --------------------------------------------------------------------------- DBSCAN

def neighborhoods(x: np.ndarray, eps: float, chunk: int = 1024) -> list[np.ndarray]:
    """Indices within ``eps`` of each row (the row itself included)."""
    out = []
    for start in range(0, len(x), chunk):
        d = np.sqrt(sq_distances(x[start:start + chunk], x))
        for row in d:
            out.append(np.flatnonzero(row <= eps))
    return out


def core_mask(data, params: DBSCANParams) -> np.ndarray:
    x = _as_matrix(data)
    return np.array([len(nb) >= params.min_pts for nb in neighborhoods(x, params.eps)])


def dbscan(data, params: DBSCANParams) -> ClusterAssignment:
    """Density-based clustering scanned in row order.

    A border point reachable from several clusters stays with the first one
    that claims it.
    """
    x = _as_matrix(data)
    n = len(x)
    nbrs = neighborhoods(x, params.eps)
    core = np.array([len(nb) >= params.min_pts for nb in nbrs])
    unvisited = -2
    labels = np.full(n, unvisited, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != unvisited:
            continue
        if not core[i]:
            labels[i] = NOISE
            continue
        labels[i] = cluster
        stack = list(nbrs[i])
        while stack:
            j = stack.pop()
            if labels[j] == NOISE:
                labels[j] = cluster
            if labels[j] != unvisited:
                continue
            labels[j] = cluster
            if core[j]:
                stack.extend(nbrs[j])
        cluster += 1
    return ClusterAssignment.from_labels(labels)
