import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from privclust import data as dm
from privclust import ldp
from privclust import selection as sel
from privclust.errors import ParameterError, SelectionError

from conftest import blobs, seven_blobs, two_blobs

KM, HC, GMM = (sel.AlgorithmCandidate(k, k=3) for k in ("kmeans", "hierarchical", "gmm"))


def scored(kind_scores):
    return [sel.ScoredCandidate(c, s, h) for c, (s, h) in kind_scores]


def oracle(scores, alpha):
    """Filter to the silhouette band, then first index with the largest CH."""
    usable = [(i, s, c) for i, (s, c) in enumerate(scores) if s is not None]
    if not usable:
        return None
    top = max(s for _, s, _ in usable)
    band = [(i, c) for i, s, c in usable if s >= top - alpha]
    best = max(c for _, c in band)
    return next(i for i, c in band if c == best)


class TestKnee:
    def test_linear_curve_smallest_interior(self):
        assert sel.knee_index(np.arange(10.0)) == 1
        assert sel.knee_index(-np.arange(10.0)) == 1

    def test_flat_curve(self):
        assert sel.knee_index(np.ones(5)) == 1

    def test_decreasing_elbow(self):
        assert sel.knee_index([100, 20, 10, 8, 7, 6]) == 1
        assert sel.knee_index([100, 90, 30, 25, 22, 20]) == 2

    def test_increasing_knee(self):
        assert sel.knee_index([1, 1.1, 1.2, 1.3, 5, 9]) == 3

    def test_too_short(self):
        with pytest.raises(ParameterError):
            sel.knee_index([1.0, 2.0])

    def test_non_finite(self):
        with pytest.raises(ParameterError):
            sel.knee_index([1.0, math.nan, 2.0])

    @given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=30),
           st.floats(0.01, 100), st.floats(-100, 100))
    def test_affine_invariant(self, ys, a, b):
        y = np.array(ys)
        if np.ptp(y) < 1e-3:
            return
        assert sel.knee_index(a * y + b) == sel.knee_index(y)


class TestElbow:
    def test_seven_blobs(self):
        assert sel.elbow_k(seven_blobs().rows, (2, 12), seed=0) == 7

    def test_range_too_small(self):
        with pytest.raises(ParameterError):
            sel.elbow_k(np.zeros((10, 2)), (2, 3))

    @pytest.mark.parametrize("seed", [0, 1])
    def test_rigid_and_scale_invariant(self, seed):
        x = blobs(4, 60, 3, 8.0, 20.0, center_seed=seed).rows
        q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(3, 3)))
        y = 3.5 * x @ q.T + 11.0
        assert sel.elbow_k(y, (1, 10), seed) == sel.elbow_k(x, (1, 10), seed)
        assert sel.silhouette_k(y, (2, 8), seed) == sel.silhouette_k(x, (2, 8), seed)


class TestSilhouetteK:
    def test_two_far_blobs(self):
        assert sel.silhouette_k(two_blobs().rows, (2, 6)) == 2

    def test_single_option(self):
        assert sel.silhouette_k(two_blobs().rows, (2, 2)) == 2

    def test_seven_blobs(self):
        assert sel.silhouette_k(seven_blobs().rows, (2, 12)) == 7


class TestDBSCANParameters:
    def test_grid_spacing(self):
        g = np.stack(np.meshgrid(np.arange(10.0), np.arange(10.0)), -1).reshape(-1, 2) * 0.5
        assert sel.knn_eps(g, 1) == pytest.approx(0.5)

    def test_outliers(self):
        rng = np.random.default_rng(0)
        dense = np.vstack([rng.normal(0, 0.2, (95, 2)), rng.normal(20, 0.2, (95, 2))])
        far = rng.uniform(-100, 100, (10, 2))
        x = np.vstack([dense, far])
        eps = sel.knn_eps(x, 4)
        intra = sel.k_distances(dense, 4).max()
        outlier = np.sort(sel.k_distances(x, 4))[-10:].min()
        assert intra * 0.5 <= eps < outlier

    def test_two_points(self):
        assert sel.knn_eps(np.array([[0.0, 0.0], [3.0, 4.0]]), 1) == 5.0

    def test_all_duplicates(self):
        with pytest.raises(ParameterError):
            sel.knn_eps(np.zeros((10, 2)), 2)

    def test_duplicate_heavy_knee_positive(self):
        x = np.vstack([np.zeros((50, 2)), np.ones((50, 2)), [[5.0, 5.0]]])
        assert sel.knn_eps(x, 3) > 0

    def test_k_distances_exclude_self(self):
        np.testing.assert_allclose(sel.k_distances(np.array([0.0, 1.0, 3.0]), 1), [1, 1, 2])

    @pytest.mark.parametrize("dim,n,expect", [(2, 100, 4), (10, 100, 20), (1, 3, 2), (1, 100, 4)])
    def test_min_pts(self, dim, n, expect):
        assert sel.min_pts(dim, n) == expect


class TestChoose:
    def test_paper_dataset_one(self):
        rec = sel.choose(scored([(GMM, (0.34, 301.30)), (KM, (0.36, 318.13)), (HC, (0.31, 237.61))]), 0.1)
        assert rec.best_algorithm.kind == "kmeans"
        assert rec.max_silhouette == 0.36
        assert rec.silhouette_threshold == pytest.approx(0.26)

    def test_paper_dataset_two(self):
        rec = sel.choose(scored([(GMM, (0.23, 46.88)), (KM, (0.36, 61.92)), (HC, (0.37, 51.57))]), 0.1)
        assert rec.best_algorithm.kind == "kmeans"
        assert rec.max_silhouette == 0.37
        assert rec.best_ch_index == 61.92

    def test_single_candidate(self):
        assert sel.choose(scored([(HC, (0.1, 5.0))])).best_algorithm is HC

    def test_ch_tie_list_order(self):
        rec = sel.choose(scored([(HC, (0.5, 10.0)), (KM, (0.5, 10.0))]))
        assert rec.best_algorithm is HC

    def test_unscorable_skipped(self):
        db = sel.AlgorithmCandidate("dbscan", eps=1.0, min_pts=4)
        rec = sel.choose([sel.ScoredCandidate(db, None, None), *scored([(KM, (0.2, 3.0))])])
        assert rec.best_algorithm is KM

    def test_none_scorable(self):
        db = sel.AlgorithmCandidate("dbscan", eps=1.0, min_pts=4)
        with pytest.raises(SelectionError, match="no scorable candidate"):
            sel.choose([sel.ScoredCandidate(db, None, None)])

    def test_negative_alpha(self):
        with pytest.raises(ParameterError):
            sel.choose(scored([(KM, (0.2, 3.0))]), -0.1)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(2024)
        cands = [sel.AlgorithmCandidate("kmeans", k=k) for k in range(1, 7)]
        for _ in range(1000):
            m = int(rng.integers(1, 7))
            # coarse grids make silhouette and CH ties common
            scores = [(None, None) if rng.random() < 0.2 else
                      (float(rng.integers(-10, 11)) / 10, float(rng.integers(0, 6))) for _ in range(m)]
            alpha = float(rng.choice([0.0, 0.1, 0.2, 0.5]))
            expect = oracle(scores, alpha)
            sc = [sel.ScoredCandidate(c, s, h) for c, (s, h) in zip(cands, scores)]
            if expect is None:
                with pytest.raises(SelectionError):
                    sel.choose(sc, alpha)
                continue
            rec = sel.choose(sc, alpha)
            assert rec.best_algorithm == cands[expect]
            band = [s for s, _ in scores if s is not None]
            assert rec.silhouette_threshold == pytest.approx(max(band) - alpha)
            assert rec.silhouette_threshold <= sc[expect].silhouette_score <= rec.max_silhouette


def test_select_best_with_injected_scores(monkeypatch):
    table = {"gmm": (0.23, 46.88), "kmeans": (0.36, 61.92), "hierarchical": (0.37, 51.57)}
    monkeypatch.setattr(sel, "score_candidate", lambda data, c, seed=0: sel.ScoredCandidate(c, *table[c.kind]))
    rec = sel.select_best(np.zeros((5, 2)), [sel.AlgorithmCandidate(k, k=3) for k in ("gmm", "kmeans", "hierarchical")])
    assert rec.best_algorithm.kind == "kmeans" and rec.best_parameters == {"k": 3}


class TestScoreCandidate:
    def test_dbscan_single_cluster_unscorable(self):
        c = sel.AlgorithmCandidate("dbscan", eps=100.0, min_pts=2)
        assert not sel.score_candidate(two_blobs().rows, c).scorable

    def test_dbscan_mostly_noise_unscorable(self):
        rng = np.random.default_rng(0)
        x = np.vstack([rng.normal(0, 0.01, (10, 2)), rng.normal(5, 0.01, (10, 2)), rng.uniform(-50, 50, (30, 2))])
        c = sel.AlgorithmCandidate("dbscan", eps=0.1, min_pts=3)
        assert cl_k(x, c) == 2
        assert not sel.score_candidate(x, c).scorable

    def test_kmeans_scored(self):
        s = sel.score_candidate(two_blobs().rows, sel.AlgorithmCandidate("kmeans", k=2))
        assert s.scorable and s.silhouette_score > 0.8


def cl_k(x, c):
    return c.run(x).k_effective


def test_candidate_validation():
    with pytest.raises(ParameterError):
        sel.AlgorithmCandidate("kmeans")
    with pytest.raises(ParameterError):
        sel.AlgorithmCandidate("spectral", k=2)
    with pytest.raises(ParameterError):
        sel.AlgorithmCandidate("dbscan", eps=-1, min_pts=3)


def test_recommendation_record():
    rec = sel.choose(scored([(KM, (0.36, 61.92))]))
    assert set(rec.to_record()) == {"algorithm", "params", "max_silhouette", "threshold", "best_ch_index"}
    assert '"algorithm": "kmeans"' in rec.to_json()


def _noisy(d, eps, seed, bins=10):
    return ldp.perturb_dataset(ldp.discretize(d, bins).without_labels(), eps, seed)


class TestServer:
    def test_rejects_clean_data(self):
        with pytest.raises(TypeError):
            sel.server_recommend(two_blobs())

    def test_deterministic(self):
        nd = _noisy(two_blobs(), 5.0, 0)
        a, b = sel.server_recommend(nd, seed=3), sel.server_recommend(nd, seed=3)
        assert a == b and a.to_json() == b.to_json()

    def test_tight_blob_still_returns(self):
        d = dm.make_blobs(dm.BlobSpec(1, 150, 2, np.zeros((1, 2)), 0.5, seed=0))
        rec = sel.server_recommend(_noisy(d, 5.0, 1))
        assert rec.best_algorithm.kind in sel.KINDS
        assert rec == sel.server_recommend(_noisy(d, 5.0, 1))

    def test_restricted_algorithms(self):
        cfg = sel.SelectionConfig(algorithms=("gmm",))
        assert sel.server_recommend(_noisy(two_blobs(), 5.0, 0), cfg).best_algorithm.kind == "gmm"

    def test_fixed_dbscan_params(self):
        nd = _noisy(two_blobs(), 10.0, 0)
        cfg = sel.SelectionConfig(algorithms=("dbscan",), dbscan_eps=2.0, dbscan_min_pts=5)
        rec = sel.server_recommend(nd, cfg)
        assert rec.best_parameters == {"eps": 2.0, "min_pts": 5}

    def test_standardize_flag(self):
        nd = _noisy(two_blobs(), 5.0, 0)
        x = sel.server_view(nd, standardize=True)
        np.testing.assert_allclose(x.mean(0), 0, atol=1e-12)
        np.testing.assert_allclose(x.std(0), 1, atol=1e-12)

    def test_stability_on_disjoint_samples(self):
        """Two disjoint equal-size noisy samples lead to the same algorithm kind."""
        pop = blobs(3, 200, 4, 10.0, 20.0, center_seed=5)
        agree = 0
        for t in range(100):
            nd = _noisy(pop, 5.0, t)
            perm = np.random.default_rng(t).permutation(nd.n)
            a = sel.server_recommend(nd.take(np.sort(perm[:150])), seed=t)
            b = sel.server_recommend(nd.take(np.sort(perm[150:300])), seed=t)
            agree += a.best_algorithm.kind == b.best_algorithm.kind
        assert agree >= 95
