import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tomdmvc.cluster import kmeans, normalized_laplacian, spectral_clustering
from tomdmvc.exceptions import ValidationError
from tomdmvc.metrics import adjusted_rand


def blocks(sizes, rng, noise=0.0):
    n = sum(sizes)
    M = np.zeros((n, n))
    start = 0
    for s in sizes:
        M[start:start + s, start:start + s] = rng.random((s, s)) + 0.5
        start += s
    M += noise * rng.random((n, n))
    np.fill_diagonal(M, 0)
    return M


class TestKmeans:
    def test_separated_points(self):
        res = kmeans(np.array([0.0, 0.1, 10, 10.1]), 2, seed=1)
        assert res.labels[0] == res.labels[1] != res.labels[2] == res.labels[3]

    def test_k_equals_n(self, rng):
        res = kmeans(rng.standard_normal((5, 2)), 5)
        assert len(set(res.labels)) == 5 and res.inertia == 0

    def test_duplicates(self):
        res = kmeans(np.ones((4, 3)), 1)
        assert res.inertia == 0 and not res.labels.any()

    def test_deterministic(self, rng):
        pts = rng.standard_normal((30, 3))
        a, b = kmeans(pts, 4, seed=9), kmeans(pts, 4, seed=9)
        assert np.array_equal(a.labels, b.labels) and a.inertia == b.inertia

    def test_k_out_of_range(self):
        with pytest.raises(ValidationError):
            kmeans(np.zeros((3, 2)), 4)
        with pytest.raises(ValidationError):
            kmeans(np.zeros((3, 2)), 0)

    @given(st.integers(0, 2**31), st.integers(1, 6))
    @settings(max_examples=30, deadline=None)
    def test_inertia_nonincreasing(self, seed, k):
        pts = np.random.default_rng(seed).standard_normal((25, 2))
        res = kmeans(pts, k, seed=seed, n_init=1)
        assert np.all(np.diff(res.history) <= 1e-9)
        assert res.inertia <= res.history[0] + 1e-9
        assert set(res.labels) <= set(range(k))


class TestSpectral:
    def test_two_blocks(self, rng):
        M = blocks([4, 6], rng)
        labels = spectral_clustering(M, 2, seed=3).labels
        assert len(set(labels[:4])) == 1 and len(set(labels[4:])) == 1 and labels[0] != labels[4]

    @pytest.mark.parametrize("seed", range(5))
    def test_components_any_seed(self, rng, seed):
        sizes = [3, 5, 4, 6]
        M = blocks(sizes, rng)
        truth = np.repeat(np.arange(4), sizes)
        assert adjusted_rand(spectral_clustering(M, 4, seed=seed).labels, truth) == 1.0

    def test_k_one(self, rng):
        assert not spectral_clustering(blocks([3, 3], rng), 1).labels.any()

    def test_permutation_equivariant(self, rng):
        M = blocks([5, 5, 5], rng, noise=0.05)
        perm = rng.permutation(15)
        a = spectral_clustering(M, 3, seed=0).labels
        b = spectral_clustering(M[np.ix_(perm, perm)], 3, seed=0).labels
        assert adjusted_rand(a[perm], b) == 1.0

    def test_isolated_node_keeps_identity_row(self):
        M = np.zeros((3, 3))
        M[0, 1] = M[1, 0] = 1
        L = normalized_laplacian(M)
        assert np.array_equal(L[2], [0, 0, 1])

    def test_validation(self, rng):
        with pytest.raises(ValidationError):
            spectral_clustering(np.zeros((2, 3)), 1)
        with pytest.raises(ValidationError):
            spectral_clustering(blocks([2, 2], rng), 5)
