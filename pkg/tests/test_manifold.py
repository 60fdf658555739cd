import numpy as np
import pytest
from scipy.stats import spearmanr

from undertext.dimred import (
    classical_mds,
    geodesics,
    isomap_embed,
    isomap_project,
    knn_graph,
    landmark_isomap_embed,
)
from undertext.errors import ConfigError, DataError, GraphDisconnectedError


def procrustes_residual(a, b):
    """RMS residual after the best rigid alignment (rotation/reflection +
    translation) of b onto a."""
    a0 = a - a.mean(axis=0)
    b0 = b - b.mean(axis=0)
    u, _, vt = np.linalg.svd(b0.T @ a0)
    rot = u @ vt
    return float(np.sqrt(np.mean((b0 @ rot - a0) ** 2)))


def floyd_warshall(weights):
    """Independent all-pairs shortest path oracle (dense triple loop)."""
    n = weights.shape[0]
    dist = weights.copy()
    for k in range(n):
        for i in range(n):
            for j in range(n):
                via = dist[i, k] + dist[k, j]
                if via < dist[i, j]:
                    dist[i, j] = via
    return dist


class TestKnnGraph:
    def test_collinear_middle_degree(self):
        x = np.array([[0.0], [1.0], [2.0]])
        graph = knn_graph(x, 1)
        # middle point is nearest neighbor of both ends; union symmetrization
        assert len(graph.neighbors(1)) == 2
        assert len(graph.neighbors(0)) == 1

    def test_duplicate_points_epsilon_weight(self):
        x = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
        graph = knn_graph(x, 1)
        weights = dict(graph.neighbors(0))
        assert weights[1] == pytest.approx(1e-12)

    def test_complete_graph(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(6, 2))
        graph = knn_graph(x, 5)
        for i in range(6):
            assert len(graph.neighbors(i)) == 5

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(20, 3))
        graph = knn_graph(x, 3)
        mat = graph.matrix.toarray()
        np.testing.assert_allclose(mat, mat.T)

    def test_k_out_of_range(self):
        x = np.zeros((4, 2))
        with pytest.raises(ConfigError):
            knn_graph(x, 4)
        with pytest.raises(ConfigError):
            knn_graph(x, 0)


class TestGeodesics:
    def test_path_graph(self):
        x = np.arange(6, dtype=float)[:, None]
        graph = knn_graph(x, 1)
        dist = geodesics(graph)
        for i in range(6):
            for j in range(6):
                assert dist[i, j] == pytest.approx(abs(i - j))

    def test_cycle_single_source(self):
        x = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
        graph = knn_graph(x, 2)
        dist = geodesics(graph, sources=[0])
        np.testing.assert_allclose(dist[0], [0, 1, 2, 1])

    def test_matches_floyd_warshall_oracle(self):
        # snap edge weights to dyadic rationals so every path sum is exact in
        # float and the two algorithms must agree bit for bit
        rng = np.random.default_rng(30)
        x = rng.uniform(size=(30, 2))
        graph = knn_graph(x, 4)
        graph.matrix.data = np.round(graph.matrix.data * 2**20) / 2**20
        dense = graph.matrix.toarray()
        weights = np.where(dense > 0, dense, np.inf)
        np.fill_diagonal(weights, 0.0)
        oracle = floyd_warshall(weights)
        dist = geodesics(graph)
        np.testing.assert_array_equal(dist, oracle)

    def test_disconnected_reports_component_sizes(self):
        x = np.vstack([np.zeros((3, 2)), np.full((4, 2), 100.0)])
        x += np.random.default_rng(2).normal(scale=0.01, size=x.shape)
        graph = knn_graph(x, 1)
        with pytest.raises(GraphDisconnectedError) as err:
            geodesics(graph)
        assert err.value.component_sizes == [4, 3]

    def test_geodesic_at_least_euclidean(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(size=(25, 2))
        graph = knn_graph(x, 4)
        dist = geodesics(graph)
        from scipy.spatial.distance import cdist

        euclid = cdist(x, x)
        assert np.all(dist - euclid >= -1e-12)


class TestClassicalMds:
    def test_right_triangle_345(self):
        d = np.array([[0, 3, 4], [3, 0, 5], [4, 5, 0]], float)
        result = classical_mds(d, 2)
        from scipy.spatial.distance import cdist

        recon = cdist(result.embedding, result.embedding)
        np.testing.assert_allclose(recon, d, atol=1e-9)

    def test_all_zero_distances_flagged(self):
        result = classical_mds(np.zeros((4, 4)), 2)
        assert result.deficient
        np.testing.assert_array_equal(result.embedding, 0.0)

    def test_recovers_plane_points_up_to_rigid_transform(self):
        rng = np.random.default_rng(20)
        pts = rng.normal(size=(20, 2))
        from scipy.spatial.distance import cdist

        result = classical_mds(cdist(pts, pts), 2)
        assert procrustes_residual(pts, result.embedding) < 1e-8

    def test_asymmetric_rejected(self):
        d = np.array([[0, 1.0], [1.1, 0]])
        with pytest.raises(DataError):
            classical_mds(d, 1)

    def test_eigenvalues_non_increasing(self):
        rng = np.random.default_rng(21)
        pts = rng.normal(size=(15, 3))
        from scipy.spatial.distance import cdist

        result = classical_mds(cdist(pts, pts), 3)
        assert np.all(np.diff(result.eigenvalues) <= 1e-12)


def quarter_circle(n=50):
    theta = np.linspace(0.0, np.pi / 2, n)
    return np.stack([np.cos(theta), np.sin(theta)], axis=1), theta


class TestIsomap:
    def test_quarter_circle_rank_order(self):
        x, theta = quarter_circle(50)
        model = isomap_embed(x, k=2, q=1)
        rho = spearmanr(model.embedding[:, 0], theta).statistic
        assert abs(rho) == pytest.approx(1.0)

    def test_collinear_equals_centered_input(self):
        x = np.linspace(0, 5, 12)[:, None]
        model = isomap_embed(x, k=2, q=1)
        centered = x[:, 0] - x[:, 0].mean()
        direct = model.embedding[:, 0]
        err = min(
            np.max(np.abs(direct - centered)),
            np.max(np.abs(direct + centered)),
        )
        assert err < 1e-8

    def test_disconnected_raises(self):
        x = np.vstack([np.zeros((5, 2)), np.full((5, 2), 50.0)])
        x += np.random.default_rng(4).normal(scale=0.01, size=x.shape)
        with pytest.raises(GraphDisconnectedError):
            isomap_embed(x, k=2, q=1)

    def test_largest_component_fallback(self):
        x = np.vstack([np.zeros((7, 2)), np.full((4, 2), 50.0)])
        x += np.random.default_rng(5).normal(scale=0.01, size=x.shape)
        model = isomap_embed(x, k=2, q=1, allow_largest_component=True)
        assert model.training_points.shape[0] == 7
        assert model.dropped_indices.tolist() == [7, 8, 9, 10]

    def test_cap_enforced(self):
        x = np.random.default_rng(6).normal(size=(30, 2))
        with pytest.raises(ConfigError):
            isomap_embed(x, k=3, q=1, cap=10)


class TestLandmarkIsomap:
    def test_all_landmarks_degenerates_to_isomap(self):
        rng = np.random.default_rng(40)
        x = rng.normal(size=(60, 3))
        full = isomap_embed(x, k=6, q=2)
        landmark = landmark_isomap_embed(x, k=6, q=2, n_landmarks=60)
        assert procrustes_residual(full.embedding, landmark.embedding) < 1e-6

    def test_landmarks_triangulate_onto_their_mds_coords(self):
        rng = np.random.default_rng(41)
        x = rng.normal(size=(50, 3))
        model = landmark_isomap_embed(x, k=5, q=2, n_landmarks=15)
        block = model.geodesic[:, model.landmark_indices]
        block = 0.5 * (block + block.T)
        mds = classical_mds(block, 2)
        np.testing.assert_allclose(
            model.embedding[model.landmark_indices], mds.embedding, atol=1e-8
        )

    def test_maxmin_deterministic(self):
        rng = np.random.default_rng(42)
        x = rng.normal(size=(40, 3))
        a = landmark_isomap_embed(x, k=5, q=2, n_landmarks=10)
        b = landmark_isomap_embed(x, k=5, q=2, n_landmarks=10)
        np.testing.assert_array_equal(a.landmark_indices, b.landmark_indices)
        np.testing.assert_array_equal(a.embedding, b.embedding)

    def test_random_selection_seeded(self):
        rng = np.random.default_rng(43)
        x = rng.normal(size=(40, 3))
        a = landmark_isomap_embed(x, k=5, q=2, n_landmarks=10, selection="random", seed=3)
        b = landmark_isomap_embed(x, k=5, q=2, n_landmarks=10, selection="random", seed=3)
        np.testing.assert_array_equal(a.landmark_indices, b.landmark_indices)

    def test_too_few_landmarks(self):
        x = np.random.default_rng(44).normal(size=(20, 3))
        with pytest.raises(ConfigError):
            landmark_isomap_embed(x, k=3, q=2, n_landmarks=2)


class TestIsomapProject:
    def test_training_points_on_flat_data(self):
        # flat manifold: euclidean = geodesic, so the min-over-training
        # approximation is exact and training points land on their embedding
        rng = np.random.default_rng(50)
        x = np.zeros((40, 3))
        x[:, :2] = rng.normal(size=(40, 2))
        model = isomap_embed(x, k=39, q=2)
        projected = isomap_project(model, x).values
        np.testing.assert_allclose(projected, model.embedding, atol=1e-6)

    def test_duplicate_of_training_point_identical(self):
        rng = np.random.default_rng(51)
        x = rng.normal(size=(30, 3))
        model = isomap_embed(x, k=4, q=2)
        single = isomap_project(model, x[7:8]).values
        dup = isomap_project(model, np.vstack([x[7:8], x[7:8]])).values
        np.testing.assert_array_equal(dup[0], dup[1])  # identical rows in, identical out
        np.testing.assert_allclose(single[0], dup[0], atol=1e-12)

    def test_quarter_circle_heldout_interleaves(self):
        # compare in projection space: the chord-based geodesic approximation
        # compresses coordinates relative to the training MDS, so project the
        # training points too and check the combined arc ordering
        x, theta = quarter_circle(41)
        train_idx = np.arange(0, 41, 2)
        test_idx = np.arange(1, 40, 2)
        model = isomap_embed(x[train_idx], k=2, q=1)
        train_proj = isomap_project(model, x[train_idx]).values[:, 0]
        held = isomap_project(model, x[test_idx]).values[:, 0]
        for pos, coord in enumerate(held):
            lo, hi = sorted((train_proj[pos], train_proj[pos + 1]))
            assert lo < coord < hi
        combined = np.empty(41)
        combined[train_idx] = train_proj
        combined[test_idx] = held
        rho = spearmanr(combined, theta).statistic
        assert abs(rho) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        x = np.random.default_rng(52).normal(size=(20, 3))
        model = isomap_embed(x, k=3, q=1)
        with pytest.raises(ConfigError):
            isomap_project(model, np.zeros((4, 5)))
