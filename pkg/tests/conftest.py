import numpy as np
import pytest
from hypothesis import settings

from privclust import data as dm

settings.register_profile("ci", deadline=None, max_examples=60)
settings.load_profile("ci")


def blobs(k, n_per, dim, min_dist, box, spread=1.0, center_seed=1, seed=None):
    centers = dm.separated_centers(k, dim, min_dist, box, seed=center_seed)
    return dm.make_blobs(dm.BlobSpec(k, n_per, dim, centers, spread, seed=center_seed if seed is None else seed))


def seven_blobs(seed=0):
    """n = 2100, d = 8, seven unit-spread clusters with every pair of centers 10 apart."""
    return dm.make_blobs(dm.BlobSpec(7, 300, 8, dm.simplex_centers(7, 8, 10.0), 1.0, seed=seed))


def two_blobs(n_per=200, spread=1.0, seed=0):
    centers = np.array([[0.0, 0.0], [10.0, 10.0]])
    return dm.make_blobs(dm.BlobSpec(2, n_per, 2, centers, spread, seed=seed))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one (label, passed, detail) entry per acceptance criterion, printed at the end of the session
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(ACCEPTANCE, key=lambda r: int(r[0][1:])):
        terminalreporter.write_line(f"{label} {'PASS' if ok else 'FAIL'}  {detail}")
