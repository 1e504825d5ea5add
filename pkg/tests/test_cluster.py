import numpy as np
import pytest

from glcmbayes.cluster import (
    Dendrogram,
    cut_dendrogram,
    dissimilarity,
    krzanowski_lai_rank,
    posterior_mean_surfaces,
    ward_cluster,
    within_dispersion,
)
from glcmbayes.sampler import ChainTrace

from _oracles import naive_ward_merges


def _trace(theta_sums, n_records, w=None):
    T, n = theta_sums.shape
    m = n_records
    return ChainTrace(
        beta=np.zeros((m, 1)), tau2=np.ones(m), sigma2=np.ones(m), rho=np.full(m, 0.5),
        nu=np.ones(m), n_clusters=np.ones(m, dtype=np.int64),
        w=np.zeros((m, T), dtype=np.int64) if w is None else w,
        theta_sums=theta_sums, n_records=m,
    )


class TestPosteriorMeanSurfaces:
    def test_single_iteration_equals_assigned_atoms(self):
        atoms = np.array([[1.0, 2.0], [5.0, -1.0]])
        w = np.array([[0, 1, 1]])
        sums = atoms[w[0]]
        trace = _trace(sums.copy(), 1, w=w)
        assert np.allclose(posterior_mean_surfaces(trace), atoms[w[0]])

    def test_opposite_atoms_average_to_zero(self):
        v = np.array([[3.0, -2.0, 1.0]])
        trace = _trace(v + (-v), 2)
        assert np.allclose(posterior_mean_surfaces(trace), 0.0)

    def test_streaming_equals_two_pass(self):
        # running sums match an explicit recomputation over stored atoms
        rng = np.random.default_rng(0)
        from glcmbayes.lattice import UNIQUE_TRIANGLE, lattice_graph
        from glcmbayes.sampler import Hyperparams, run_chain, subjects_from_vectors

        graph = lattice_graph(2, UNIQUE_TRIANGLE)
        vectors = [rng.integers(0, 20, 3) for _ in range(4)]
        hp = Hyperparams.default(p=1, n_iter=80, n_burn=40, seed=1)
        trace = run_chain(subjects_from_vectors(vectors), graph, hp, store_atoms=True)
        two_pass = np.zeros((4, 3))
        for k, atoms in enumerate(trace.atoms_history):
            two_pass += np.asarray(atoms)[trace.w[k]]
        two_pass /= trace.n_records
        assert np.allclose(posterior_mean_surfaces(trace), two_pass, atol=1e-12)

    def test_empty_trace_rejected(self):
        trace = _trace(np.zeros((2, 3)), 1)
        trace.n_records = 0
        with pytest.raises(ValueError):
            posterior_mean_surfaces(trace)


class TestDissimilarity:
    def test_identical_rows_zero(self):
        s = np.ones((3, 4))
        assert np.allclose(dissimilarity(s), 0.0)

    def test_unit_vectors(self):
        s = np.eye(2)
        d = dissimilarity(s)
        assert d[0, 1] == pytest.approx(2.0)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(1)
        s = rng.normal(size=(10, 5))
        d = dissimilarity(s)
        for u in range(10):
            for v in range(10):
                assert d[u, v] == pytest.approx(((s[u] - s[v]) ** 2).sum(), abs=1e-12)


class TestWardCluster:
    def test_two_points_single_merge(self):
        d = dissimilarity(np.array([[0.0], [3.0]]))
        dend = ward_cluster(d)
        assert dend.merges.shape == (1, 4)
        assert dend.merges[0, 2] == pytest.approx(9.0)

    def test_duplicate_point_merges_at_zero(self):
        pts = np.array([[1.0, 1.0], [1.0, 1.0], [4.0, 5.0]])
        dend = ward_cluster(dissimilarity(pts))
        assert dend.merges[0, 2] == pytest.approx(0.0)
        assert dend.merges[0, 0] == 0 and dend.merges[0, 1] == 1

    def test_matches_naive_ward_oracle(self):
        rng = np.random.default_rng(2)
        for trial in range(30):
            T = int(rng.integers(2, 9))
            pts = rng.normal(size=(T, int(rng.integers(1, 4))))
            dend = ward_cluster(dissimilarity(pts))
            oracle = naive_ward_merges(pts)
            for k, (a, b, height, size) in enumerate(oracle):
                assert dend.merges[k, 0] == a and dend.merges[k, 1] == b, f"trial {trial} step {k}"
                assert dend.merges[k, 2] == pytest.approx(height, rel=1e-9, abs=1e-12)
                assert dend.merges[k, 3] == size

    def test_heights_non_decreasing(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            pts = rng.normal(size=(12, 3))
            dend = ward_cluster(dissimilarity(pts))
            heights = dend.merges[:, 2]
            assert np.all(np.diff(heights) >= -1e-10)


class TestCutDendrogram:
    def test_every_cut_size(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(9, 2))
        dend = ward_cluster(dissimilarity(pts))
        for g in range(1, 10):
            part = cut_dendrogram(dend, g)
            assert part.g == g
            assert np.unique(part.labels).size == g

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(8, 3)) * 3
        perm = rng.permutation(8)
        d1 = ward_cluster(dissimilarity(pts))
        d2 = ward_cluster(dissimilarity(pts[perm]))
        for g in (2, 3, 4):
            l1 = cut_dendrogram(d1, g).labels
            l2 = cut_dendrogram(d2, g).labels
            aligned = np.empty_like(l2)
            aligned[perm] = l2
            co1 = l1[:, None] == l1[None, :]
            co2 = aligned[:, None] == aligned[None, :]
            assert np.array_equal(co1, co2)


class TestKrzanowskiLai:
    def test_two_blobs(self):
        rng = np.random.default_rng(6)
        pts = np.vstack([rng.normal(0, 0.05, size=(10, 4)), rng.normal(5, 0.05, size=(10, 4))])
        dend = ward_cluster(dissimilarity(pts))
        assert krzanowski_lai_rank(pts, dend, g_max=8) == 2

    def test_within_dispersion_non_increasing(self):
        rng = np.random.default_rng(7)
        pts = rng.normal(size=(15, 6))
        dend = ward_cluster(dissimilarity(pts))
        W = [within_dispersion(pts, cut_dendrogram(dend, g).labels) for g in range(1, 12)]
        assert all(W[i + 1] <= W[i] + 1e-10 for i in range(len(W) - 1))

    def test_five_blob_calibration(self):
        rng = np.random.default_rng(8)
        hits = 0
        for _ in range(50):
            centers = np.column_stack([2 + np.arange(5.0), 14 - np.arange(5.0)])
            pts = np.vstack([c + rng.normal(0, 0.02, size=(10, 2)) for c in centers])
            dend = ward_cluster(dissimilarity(pts))
            hits += int(krzanowski_lai_rank(pts, dend, g_max=10) == 5)
        assert hits >= 45

    def test_g_max_bounds(self):
        pts = np.random.default_rng(9).normal(size=(6, 2))
        dend = ward_cluster(dissimilarity(pts))
        with pytest.raises(ValueError):
            krzanowski_lai_rank(pts, dend, g_max=1)
        with pytest.raises(ValueError):
            krzanowski_lai_rank(pts, dend, g_max=6)
