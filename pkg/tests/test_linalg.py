import numpy as np
import pytest

from spcalda import (
    GAMMA_INF,
    DimensionGuard,
    InvalidInput,
    LabeledDataset,
    ScatterModel,
    center_columns,
    class_statistics,
    deviation_stack,
    principal_angles,
    scatter_matrices,
    top_principal_directions,
)
from conftest import random_dataset


class TestLabeledDataset:
    def test_derived_fields(self, d0):
        assert d0.n == 4 and d0.p == 2 and d0.n_classes == 2
        assert d0.class_counts.tolist() == [2, 2]
        assert d0.class_indices[0].tolist() == [0, 1]

    def test_missing_class_rejected(self):
        with pytest.raises(InvalidInput, match="zero members"):
            LabeledDataset(np.zeros((2, 2)), [1, 3])

    def test_zero_based_labels_rejected(self):
        with pytest.raises(InvalidInput):
            LabeledDataset(np.zeros((2, 2)), [0, 1])

    def test_length_mismatch(self):
        with pytest.raises(InvalidInput):
            LabeledDataset(np.zeros((3, 2)), [1, 2])

    def test_non_integer_labels(self):
        with pytest.raises(InvalidInput):
            LabeledDataset(np.zeros((2, 2)), [1.5, 2.0])


class TestCenterColumns:
    def test_hand_example(self):
        raw = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]])
        centered, mean = center_columns(raw)
        np.testing.assert_array_equal(mean, [1.0, 1.0])
        np.testing.assert_array_equal(
            centered, [[-1, -1], [1, -1], [-1, 1], [1, 1]]
        )

    def test_already_centered(self):
        raw = np.array([[-1.0, 2.0], [1.0, -2.0]])
        centered, mean = center_columns(raw)
        np.testing.assert_array_equal(centered, raw)
        np.testing.assert_array_equal(mean, [0.0, 0.0])

    def test_single_row(self):
        centered, mean = center_columns(np.array([[3.0, -4.0, 5.0]]))
        np.testing.assert_array_equal(centered, np.zeros((1, 3)))
        np.testing.assert_array_equal(mean, [3.0, -4.0, 5.0])

    def test_empty_rejected(self):
        with pytest.raises(InvalidInput):
            center_columns(np.empty((0, 3)))


class TestClassStatistics:
    def test_hand_example(self, d0):
        centered, _ = center_columns(d0.data)
        centroids, counts = class_statistics(LabeledDataset(centered, d0.labels))
        np.testing.assert_allclose(centroids, [[0, -1], [0, 1]], atol=1e-15)
        assert counts.tolist() == [2, 2]
        np.testing.assert_allclose(counts @ centroids, 0.0, atol=1e-10)

    def test_identical_rows(self):
        ds = LabeledDataset(np.zeros((4, 3)), [1, 2, 1, 2])
        centroids, _ = class_statistics(ds)
        np.testing.assert_array_equal(centroids, np.zeros((2, 3)))

    def test_one_point_per_class(self):
        data = np.arange(6.0).reshape(3, 2) - 2.0
        ds = LabeledDataset(data, [1, 2, 3])
        centroids, counts = class_statistics(ds)
        np.testing.assert_array_equal(centroids, data)
        assert counts.tolist() == [1, 1, 1]

    def test_weighted_mean_zero_random(self):
        rng = np.random.default_rng(5)
        ds = random_dataset(rng, 37, 6, 3)
        centered, _ = center_columns(ds.data)
        centroids, counts = class_statistics(LabeledDataset(centered, ds.labels))
        np.testing.assert_allclose(counts @ centroids / ds.n, 0.0, atol=1e-10)


class TestScatterMatrices:
    def test_hand_example(self, d0):
        centered, _ = center_columns(d0.data)
        cds = LabeledDataset(centered, d0.labels)
        w, b, t1 = scatter_matrices(cds, 1.0)
        np.testing.assert_allclose(w, [[1, 0], [0, 0]], atol=1e-15)
        np.testing.assert_allclose(b, [[0, 0], [0, 1]], atol=1e-15)
        np.testing.assert_allclose(t1, np.eye(2), atol=1e-15)
        _, _, t4 = scatter_matrices(cds, 4.0)
        np.testing.assert_allclose(t4, [[1, 0], [0, 4]], atol=1e-15)

    def test_total_equals_gram_when_centered(self):
        rng = np.random.default_rng(0)
        ds = random_dataset(rng, 25, 8, 3)
        centered, _ = center_columns(ds.data)
        cds = LabeledDataset(centered, ds.labels)
        _, _, t1 = scatter_matrices(cds, 1.0)
        np.testing.assert_allclose(t1, centered.T @ centered / ds.n, atol=1e-12)

    def test_single_class(self):
        rng = np.random.default_rng(1)
        data = rng.standard_normal((10, 4))
        data -= data.mean(axis=0)
        ds = LabeledDataset(data, np.ones(10, dtype=int))
        for gamma in (0.5, 2.0, 64.0):
            w, b, t = scatter_matrices(ds, gamma)
            np.testing.assert_allclose(b, 0.0, atol=1e-14)
            np.testing.assert_allclose(t, w, atol=1e-14)

    def test_positive_semidefinite_and_symmetric(self):
        rng = np.random.default_rng(2)
        ds = random_dataset(rng, 30, 12, 4)
        w, b, t = scatter_matrices(ds, 2.0)
        for m in (w, b, t):
            np.testing.assert_allclose(m, m.T, atol=1e-12)
            assert np.linalg.eigvalsh(m).min() > -1e-10

    @pytest.mark.parametrize("gamma", [0.0, -1.0, float("inf"), float("nan")])
    def test_invalid_gamma(self, d0, gamma):
        with pytest.raises(InvalidInput):
            scatter_matrices(d0, gamma)

    def test_dimension_guard(self):
        ds = LabeledDataset(np.zeros((2, 11)) + np.arange(11), [1, 2])
        with pytest.raises(DimensionGuard):
            scatter_matrices(ds, 1.0, max_materialize=10)

    def test_trace_identity(self):
        rng = np.random.default_rng(3)
        ds = random_dataset(rng, 40, 15, 3)
        w, b, _ = scatter_matrices(ds, 1.0)
        for gamma in (0.25, 1.0, 7.5, 64.0):
            _, _, t = scatter_matrices(ds, gamma)
            expected = np.trace(w) + gamma * np.trace(b)
            assert abs(np.trace(t) - expected) <= 1e-10 * abs(expected)


class TestDeviationStack:
    def test_hand_example(self, d0):
        centered, _ = center_columns(d0.data)
        cds = LabeledDataset(centered, d0.labels)
        stack = deviation_stack(cds, 1.0)
        root2 = np.sqrt(2.0)
        expected = [[-1, 0], [1, 0], [-1, 0], [1, 0], [0, -root2], [0, root2]]
        np.testing.assert_allclose(stack, expected, atol=1e-15)
        np.testing.assert_allclose(stack.T @ stack / 4, np.eye(2), atol=1e-15)
        stack4 = deviation_stack(cds, 4.0)
        np.testing.assert_allclose(stack4[4:], [[0, -2 * root2], [0, 2 * root2]], atol=1e-15)
        np.testing.assert_allclose(stack4.T @ stack4 / 4, [[1, 0], [0, 4]], atol=1e-14)

    def test_matches_scatter(self):
        rng = np.random.default_rng(4)
        ds = random_dataset(rng, 23, 9, 4)
        for gamma in (0.25, 1.0, 16.0):
            stack = deviation_stack(ds, gamma)
            assert stack.shape == (ds.n + ds.n_classes, ds.p)
            _, _, t = scatter_matrices(ds, gamma)
            np.testing.assert_allclose(stack.T @ stack / ds.n, t, rtol=1e-10, atol=1e-12)

    def test_single_class_rows(self):
        data = np.random.default_rng(6).standard_normal((8, 3))
        data -= data.mean(axis=0)
        ds = LabeledDataset(data, np.ones(8, dtype=int))
        stack = deviation_stack(ds, 3.0)
        np.testing.assert_allclose(stack[-1], 0.0, atol=1e-12)
        w, _, _ = scatter_matrices(ds, 1.0)
        np.testing.assert_allclose(stack.T @ stack / 8, w, atol=1e-12)

    @pytest.mark.parametrize("gamma", [0.0, -2.0, float("inf")])
    def test_invalid_gamma(self, d0, gamma):
        with pytest.raises(InvalidInput):
            deviation_stack(d0, gamma)


def dense_top_eigvecs(ds, gamma, q):
    _, _, t = scatter_matrices(ds, gamma)
    evals, vecs = np.linalg.eigh(t)
    return evals[::-1][:q], vecs[:, ::-1][:, :q]


class TestTopPrincipalDirections:
    def test_hand_example(self, d0):
        basis = top_principal_directions(d0, 4.0, 1)
        np.testing.assert_allclose(basis.directions, [[0.0], [1.0]], atol=1e-12)
        np.testing.assert_allclose(basis.eigenvalues, [4.0], rtol=1e-12)
        assert not basis.rank_deficient

    def test_degenerate_spectrum(self, d0):
        basis = top_principal_directions(d0, 1.0, 2)
        np.testing.assert_allclose(sorted(basis.eigenvalues), [1.0, 1.0], rtol=1e-12)
        np.testing.assert_allclose(basis.directions.T @ basis.directions, np.eye(2), atol=1e-8)
        # invariance under the scatter, not direction identity
        _, _, t = scatter_matrices(d0, 1.0)
        np.testing.assert_allclose(
            t @ basis.directions, basis.directions * basis.eigenvalues, atol=1e-10
        )

    def test_matches_dense_path(self):
        rng = np.random.default_rng(7)
        ds = random_dataset(rng, 20, 50, 3)
        basis = top_principal_directions(ds, 2.0, 10)
        evals, vecs = dense_top_eigvecs(ds, 2.0, 10)
        np.testing.assert_allclose(basis.eigenvalues, evals, rtol=1e-8)
        assert principal_angles(basis.directions, vecs).max() < 1e-6

    def test_gram_trick_equivalence_property(self):
        rng = np.random.default_rng(8)
        for _ in range(6):
            n = int(rng.integers(10, 35))
            p = int(rng.integers(5, 200))
            k = int(rng.integers(2, 5))
            gamma = float(rng.choice([0.25, 1.0, 4.0, 64.0]))
            ds = random_dataset(rng, n, p, k)
            limit = min(p, n + k)
            basis = top_principal_directions(ds, gamma, limit)
            evals_dense, vecs_dense = dense_top_eigvecs(ds, gamma, basis.q)
            lam_max = max(evals_dense[0], 1e-300)
            assert np.abs(basis.eigenvalues - evals_dense).max() / lam_max < 1e-8
            # compare subspaces at a q with a clean spectral gap
            full = dense_top_eigvecs(ds, gamma, limit)[0]
            for q in range(min(basis.q, len(full) - 1), 0, -1):
                if full[q - 1] - full[q] > 1e-6 * lam_max:
                    angle = principal_angles(
                        basis.directions[:, :q], vecs_dense[:, :q]
                    ).max()
                    assert angle < 1e-6
                    break

    def test_scale_equivariance(self):
        rng = np.random.default_rng(9)
        ds = random_dataset(rng, 18, 30, 3)
        c = 3.7
        scaled = LabeledDataset(c * ds.data, ds.labels)
        b1 = top_principal_directions(ds, 2.0, 5)
        b2 = top_principal_directions(scaled, 2.0, 5)
        np.testing.assert_allclose(b2.eigenvalues, c**2 * b1.eigenvalues, rtol=1e-10)
        assert principal_angles(b1.directions, b2.directions).max() < 1e-8

    def test_rank_truncation_flag(self):
        # rank(T) <= n - 1 = 4, so q = 7 cannot be met
        rng = np.random.default_rng(10)
        ds = random_dataset(rng, 5, 10, 2)
        basis = top_principal_directions(ds, 1.0, 7)
        assert basis.rank_deficient
        assert basis.q <= 4
        np.testing.assert_allclose(
            basis.directions.T @ basis.directions, np.eye(basis.q), atol=1e-8
        )

    @pytest.mark.parametrize("q", [0, -1, 100])
    def test_q_out_of_range(self, d0, q):
        with pytest.raises(InvalidInput):
            top_principal_directions(d0, 1.0, q)

    def test_infinite_gamma_spans_centroids(self):
        rng = np.random.default_rng(11)
        ds = random_dataset(rng, 30, 12, 4)
        centered, _ = center_columns(ds.data)
        cds = LabeledDataset(centered, ds.labels)
        basis = top_principal_directions(cds, GAMMA_INF, 3)
        assert basis.q == 3
        _, b, _ = scatter_matrices(cds, 1.0)
        evals_b = np.linalg.eigvalsh(b)[::-1][:3]
        np.testing.assert_allclose(basis.eigenvalues, evals_b, rtol=1e-8)
        centroids, _ = class_statistics(cds)
        # basis and centroid differences span the same 3-d space
        diffs = (centroids[1:] - centroids[0]).T
        qdiff, _ = np.linalg.qr(diffs)
        assert principal_angles(basis.directions, qdiff).max() < 1e-8

    def test_deterministic(self):
        rng = np.random.default_rng(12)
        ds = random_dataset(rng, 15, 40, 3)
        b1 = top_principal_directions(ds, 2.0, 6)
        b2 = top_principal_directions(ds, 2.0, 6)
        np.testing.assert_array_equal(b1.directions, b2.directions)
        np.testing.assert_array_equal(b1.eigenvalues, b2.eigenvalues)

    def test_nonincreasing_eigenvalues(self):
        rng = np.random.default_rng(13)
        ds = random_dataset(rng, 25, 60, 4)
        basis = top_principal_directions(ds, 8.0, 20)
        assert (np.diff(basis.eigenvalues) <= 1e-12).all()
        assert basis.eigenvalues.min() > -1e-10


class TestScatterModel:
    def test_invariants(self):
        rng = np.random.default_rng(14)
        ds = random_dataset(rng, 20, 7, 3)
        sm = ScatterModel.from_dataset(ds, 2.0)
        np.testing.assert_allclose(sm.centered_data.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(sm.counts @ sm.centroids / ds.n, 0.0, atol=1e-10)
        w, b, _ = scatter_matrices(LabeledDataset(sm.centered_data, ds.labels), 1.0)
        target = w + 2.0 * b
        gram = sm.deviation_rows.T @ sm.deviation_rows / ds.n
        np.testing.assert_allclose(gram, target, rtol=1e-10, atol=1e-12)

    def test_infinite_gamma_has_no_stack(self, d0):
        sm = ScatterModel.from_dataset(d0, GAMMA_INF)
        assert sm.deviation_rows is None


class TestPrincipalAngles:
    def test_identical_span(self):
        rng = np.random.default_rng(15)
        q, _ = np.linalg.qr(rng.standard_normal((8, 3)))
        rot, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        assert principal_angles(q, q @ rot).max() < 1e-10

    def test_orthogonal_spans(self):
        u = np.eye(6)[:, :2]
        v = np.eye(6)[:, 3:5]
        np.testing.assert_allclose(principal_angles(u, v), np.pi / 2, atol=1e-12)
