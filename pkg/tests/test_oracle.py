import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hebbpca.data import random_rotation, synth_gaussian, synth_mixture
from hebbpca.oracle import (
    EigenBasis,
    assign,
    batch_pca,
    cosine_alignment,
    empirical_covariance,
    jacobi_eigh,
    kmeans,
    lloyd_step,
    within_cluster_ss,
)


class TestJacobi:
    def test_diagonal_untouched(self):
        vals, vecs = jacobi_eigh(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_array_equal(vals, [3, 1, 2])
        np.testing.assert_array_equal(vecs, np.eye(3))

    def test_2x2_hand(self):
        # [[2,1],[1,2]] has eigenpairs 3 -> (1,1)/sqrt2, 1 -> (1,-1)/sqrt2
        vals, vecs = jacobi_eigh(np.array([[2.0, 1.0], [1.0, 2.0]]))
        order = np.argsort(-vals)
        np.testing.assert_allclose(vals[order], [3, 1], atol=1e-14)
        np.testing.assert_allclose(np.abs(vecs[:, order[0]]), [2**-0.5, 2**-0.5], atol=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 10**6))
    def test_reconstructs_random_symmetric(self, n, seed):
        a = np.random.default_rng(seed).normal(size=(n, n))
        a = a + a.T
        vals, v = jacobi_eigh(a)
        np.testing.assert_allclose(v @ np.diag(vals) @ v.T, a, atol=1e-9)
        np.testing.assert_allclose(v.T @ v, np.eye(n), atol=1e-12)

    def test_tiny_offdiagonal(self):
        a = np.array([[1.0, 1e-200], [1e-200, 2.0]])
        vals, _ = jacobi_eigh(a)
        np.testing.assert_allclose(np.sort(vals), [1, 2])

    def test_non_square(self):
        with pytest.raises(ValueError):
            jacobi_eigh(np.zeros((2, 3)))


class TestBatchPCA:
    def test_axis_aligned(self):
        # four samples at (+-2, 0) and (0, +-1): covariance diag(2, 0.5)
        x = np.array([[2.0, 0], [-2, 0], [0, 1], [0, -1]])
        b = batch_pca(x, 2)
        np.testing.assert_allclose(b.eigenvalues, [2.0, 0.5], atol=1e-12)
        np.testing.assert_allclose(b.eigenvectors, np.eye(2), atol=1e-12)
        assert not b.degenerate

    def test_diag_4_1_construction(self):
        x = synth_gaussian(2, 50000, [4.0, 1.0], seed=0, rotate=False)
        b = batch_pca(x, 2)
        np.testing.assert_allclose(b.eigenvalues, [4.0, 1.0], rtol=0.05)
        np.testing.assert_allclose(np.abs(b.eigenvectors), np.eye(2), atol=0.02)

    def test_identical_rows_degenerate(self):
        b = batch_pca(np.tile([1.0, -2.0, 3.0], (5, 1)), 3)
        assert b.degenerate
        assert np.all(b.eigenvalues == 0)
        np.testing.assert_allclose(b.eigenvectors @ b.eigenvectors.T, np.eye(3), atol=1e-12)

    def test_invariants(self):
        x = np.random.default_rng(3).normal(size=(200, 7)) @ np.random.default_rng(4).normal(size=(7, 7))
        b = batch_pca(x)
        cov = empirical_covariance(x)
        np.testing.assert_allclose(b.eigenvectors @ b.eigenvectors.T, np.eye(7), atol=1e-9)
        assert np.all(np.diff(b.eigenvalues) <= 0)
        assert np.all(b.eigenvalues >= -1e-12)
        recon = b.eigenvectors.T @ np.diag(b.eigenvalues) @ b.eigenvectors
        assert np.linalg.norm(recon - cov) < 1e-9
        assert abs(b.eigenvalues.sum() - np.trace(cov)) < 1e-9

    def test_matches_lapack(self):
        x = np.random.default_rng(5).normal(size=(100, 9)) * np.arange(1, 10)
        np.testing.assert_allclose(batch_pca(x).eigenvalues, np.linalg.eigvalsh(empirical_covariance(x))[::-1],
                                   atol=1e-10)

    def test_sign_convention(self):
        b = batch_pca(np.random.default_rng(6).normal(size=(50, 4)))
        for r in b.eigenvectors:
            assert r[np.argmax(np.abs(r))] > 0

    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 10**6))
    def test_rotation_equivariance(self, d, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(40, d)) * rng.uniform(0.5, 3.0, size=d)
        r = random_rotation(d, rng)
        np.testing.assert_allclose(batch_pca(x @ r.T).eigenvalues, batch_pca(x).eigenvalues, atol=1e-9)

    def test_top_k_truncates(self):
        x = np.random.default_rng(7).normal(size=(30, 5))
        full, top = batch_pca(x), batch_pca(x, 2)
        np.testing.assert_array_equal(top.eigenvalues, full.eigenvalues[:2])
        assert top.eigenvectors.shape == (2, 5)

    @pytest.mark.parametrize("n,k", [(1, 1), (5, 0), (5, 4)])
    def test_preconditions(self, n, k):
        with pytest.raises(ValueError):
            batch_pca(np.zeros((n, 3)) + np.arange(n)[:, None], k)


class TestKMeans:
    def test_k_equals_n(self):
        x = np.random.default_rng(0).normal(size=(6, 3))
        np.testing.assert_array_equal(kmeans(x, 6, range(6)), x)

    def test_one_lloyd_iteration_by_hand(self):
        x = np.array([[0.0, 0.0], [1.0, 0.0], [4.0, 0.0], [5.0, 1.0]])
        new, labels = lloyd_step(x, x[[0, 1]])
        np.testing.assert_array_equal(labels, [0, 1, 1, 1])
        np.testing.assert_allclose(new, [[0.0, 0.0], [10 / 3, 1 / 3]])

    def test_converged_on_hand_points(self):
        x = np.array([[0.0, 0.0], [1.0, 0.0], [4.0, 0.0], [5.0, 1.0]])
        np.testing.assert_allclose(kmeans(x, 2, [0, 1]), [[0.5, 0.0], [4.5, 0.5]])

    def test_empty_cluster_keeps_centroid(self):
        x = np.array([[0.0], [0.1], [0.2]])
        c = np.array([[0.1], [100.0]])
        new, _ = lloyd_step(x, c)
        assert new[1, 0] == 100.0

    def test_separated_mixture_recovers_means(self):
        centroids = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        x, labels = synth_mixture(centroids, 1.0, 3000, seed=1)
        init = [int(np.flatnonzero(labels == j)[0]) for j in range(3)]
        got = kmeans(x, 3, init)
        assert np.max(np.linalg.norm(got - centroids, axis=1)) < 0.1

    def test_objective_non_increasing(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(300, 2))
        c = x[:5].copy()
        prev = within_cluster_ss(x, c)
        for _ in range(20):
            c, _ = lloyd_step(x, c)
            cur = within_cluster_ss(x, c)
            assert cur <= prev + 1e-9
            prev = cur

    def test_assign_ties_low(self):
        assert assign(np.array([[0.5]]), np.array([[0.0], [1.0]]))[0] == 0

    def test_preconditions(self):
        x = np.zeros((3, 2))
        with pytest.raises(ValueError):
            kmeans(x, 4, [0, 1, 2, 2])
        with pytest.raises(ValueError):
            kmeans(x, 2, [1, 1])


class TestCosineAlignment:
    def basis(self):
        return batch_pca(np.random.default_rng(0).normal(size=(50, 4)) * [4, 3, 2, 1], 3)

    def test_self(self):
        b = self.basis()
        np.testing.assert_allclose(cosine_alignment(b.eigenvectors, b).values, 1.0)

    def test_negated(self):
        b = self.basis()
        np.testing.assert_allclose(cosine_alignment(-3.0 * b.eigenvectors, b).values, 1.0)

    def test_orthogonal(self):
        v = EigenBasis(np.array([1.0]), np.array([[1.0, 0.0]]), False)
        assert cosine_alignment(np.array([[0.0, 2.0]]), v).values[0] == 0.0

    def test_zero_row_flagged(self):
        b = self.basis()
        w = b.eigenvectors.copy()
        w[1] = 0.0
        a = cosine_alignment(w, b)
        assert a.values[1] == 0.0
        np.testing.assert_array_equal(a.zero_norm, [False, True, False])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            cosine_alignment(np.zeros((2, 4)), self.basis())
