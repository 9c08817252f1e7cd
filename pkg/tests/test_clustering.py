import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_force_sse, same_partition

from custvec.clustering import (
    ClusterConfig,
    ClusterModel,
    auto_bandwidth,
    fit_clusters,
    gmm_em,
    kmeans_modified,
    mean_shift,
    sse,
    som_cluster,
)


def blobs(n_per=60, seed=0, spread=0.3, centers=((0, 0, 0), (6, 0, 0), (0, 6, 0))):
    rng = np.random.default_rng(seed)
    return np.vstack([rng.normal(c, spread, (n_per, 3)) for c in centers])


def assert_nearest_center(X, model):
    d = ((X[:, None, :] - model.centers[None]) ** 2).sum(-1)
    own = d[np.arange(len(X)), model.assignments]
    assert np.all(own <= d.min(axis=1) + 1e-9)


def assert_sse_consistent(X, model):
    recomputed = float(((X - model.centers[model.assignments]) ** 2).sum())
    assert model.sse >= 0 and abs(model.sse - recomputed) <= 1e-9 * max(1.0, recomputed)
    assert model.assignments.max() < model.k


# -- config / sse ---------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        ClusterConfig(method="dbscan")
    with pytest.raises(ValueError):
        ClusterConfig(k=0)
    with pytest.raises(ValueError):
        ClusterConfig(tol=0)
    with pytest.raises(ValueError):
        ClusterConfig(method="mean_shift", bandwidth=-1)


def test_sse_examples():
    X = np.array([[0.0], [1.0]])
    assert sse(X, X, [0, 1]) == 0
    assert sse([[2.0]], [[0.0]], [0]) == 4
    assert sse(X, [[0.5]], [0, 0]) == 0.5
    with pytest.raises(IndexError):
        sse(X, [[0.5]], [0, 1])


# -- kmeans_modified ----------------------------------------------------------


def test_kmeans_line_fixture():
    m = kmeans_modified([0, 1, 10, 11], ClusterConfig(k=2))
    assert sorted(m.centers[:, 0].tolist()) == [0.5, 10.5]
    assert m.sse == pytest.approx(1.0)


def test_kmeans_k_equals_n():
    X = np.random.default_rng(0).standard_normal((6, 3))
    m = kmeans_modified(X, ClusterConfig(k=6))
    assert m.sse == 0


def test_kmeans_restart_fires():
    m = kmeans_modified([0.0, 0.2, 10.0], ClusterConfig(k=2, max_restarts=1), init_centers=[[0.0], [0.2]])
    assert m.restarts == 1
    assert m.sse == pytest.approx(0.02)


def test_kmeans_too_many_clusters():
    with pytest.raises(ValueError):
        kmeans_modified([[1, 1, 1]] * 4 + [[2, 2, 2]], ClusterConfig(k=3))


def test_kmeans_matches_brute_force():
    rng = np.random.default_rng(123)
    for _ in range(40):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(1, min(3, n) + 1))
        X = rng.standard_normal((n, 3))
        m = kmeans_modified(X, ClusterConfig(k=k, seed=int(rng.integers(1000))))
        assert abs(m.sse - brute_force_sse(X, k)) <= 1e-9


def test_kmeans_fixed_point_under_extra_lloyd_step():
    X = blobs(seed=4)
    m = kmeans_modified(X, ClusterConfig(k=4, seed=1))
    C = np.array([X[m.assignments == j].mean(axis=0) for j in range(m.k)])
    assign = np.argmin(((X[:, None] - C[None]) ** 2).sum(-1), axis=1)
    assert sse(X, C, assign) <= m.sse + 1e-9
    assert_nearest_center(X, m)
    assert_sse_consistent(X, m)


# -- som ----------------------------------------------------------------------


def test_som_matches_kmeans_on_two_blobs():
    X = blobs(centers=((0, 0, 0), (8, 8, 8)), seed=2)
    s = som_cluster(X, ClusterConfig(method="som", k=2, seed=0, max_iter=20))
    k = kmeans_modified(X, ClusterConfig(k=2))
    assert same_partition(s.assignments, k.assignments)
    assert_nearest_center(X, s)
    assert_sse_consistent(X, s)


def test_som_single_node_is_mean():
    X = blobs(seed=5)
    s = som_cluster(X, ClusterConfig(method="som", k=1, max_iter=5))
    assert np.allclose(s.centers[0], X.mean(axis=0), atol=1e-6)
    assert np.all(s.assignments == 0)


def test_som_errors():
    with pytest.raises(ValueError):
        som_cluster(np.empty((0, 3)), ClusterConfig(method="som", k=2))


# -- gmm ----------------------------------------------------------------------


def test_gmm_recovers_two_gaussians():
    rng = np.random.default_rng(7)
    mu = np.array([[0.0, 0, 0], [10.0, 0, 0]])
    truth = np.repeat([0, 1], 300)
    X = rng.standard_normal((600, 3)) + mu[truth]
    m = gmm_em(X, ClusterConfig(method="gmm", k=2, seed=0))
    order = np.argsort(m.centers[:, 0])
    assert np.all(np.linalg.norm(m.centers[order] - mu, axis=1) < 0.5)
    relabel = np.argsort(order)[m.assignments]
    assert np.mean(relabel == truth) >= 0.99
    assert_nearest_center(X, m)
    assert np.isclose(m.weights.sum(), 1.0)


def test_gmm_single_component_closed_form():
    X = np.random.default_rng(1).standard_normal((80, 3)) @ np.array([[2, 0, 0], [0.5, 1, 0], [0, 0.3, 0.2]])
    m = gmm_em(X, ClusterConfig(method="gmm", k=1))
    assert np.allclose(m.centers[0], X.mean(axis=0), atol=1e-9)
    assert np.allclose(m.covariances[0], np.cov(X.T, bias=True), atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_gmm_log_likelihood_non_decreasing(seed):
    X = blobs(seed=seed, spread=1.5)
    m = gmm_em(X, ClusterConfig(method="gmm", k=3, seed=seed))
    assert len(m.log_likelihood) >= 2
    assert np.all(np.diff(m.log_likelihood) >= -1e-9)


def test_gmm_coincident_points_regularized():
    X = np.array([[0.0, 0, 0]] * 5 + [[1.0, 1, 1]] * 5)
    m = gmm_em(X, ClusterConfig(method="gmm", k=2))
    assert np.all(np.isfinite(m.covariances))
    assert same_partition(m.assignments, [0] * 5 + [1] * 5)


# -- mean shift ---------------------------------------------------------------


def test_mean_shift_line_fixture():
    m = mean_shift([0, 0.1, 0.2, 10, 10.1], ClusterConfig(method="mean_shift", bandwidth=1))
    assert m.k == 2
    assert m.assignments.tolist() == [0, 0, 0, 1, 1]
    assert_nearest_center(np.array([[0], [0.1], [0.2], [10], [10.1]]), m)


def test_mean_shift_huge_bandwidth_single_mode():
    X = blobs(n_per=20)
    m = mean_shift(X, ClusterConfig(method="mean_shift", bandwidth=100))
    assert m.k == 1
    assert np.allclose(m.centers[0], X.mean(axis=0))


def test_mean_shift_auto_bandwidth_finds_blobs():
    X = blobs(n_per=100, spread=0.5)
    m = mean_shift(X, ClusterConfig(method="mean_shift"))
    assert m.k == 3
    assert m.bandwidth == auto_bandwidth(X, 0)
    assert_sse_consistent(X, m)


def test_mean_shift_modes_non_increasing_in_bandwidth():
    X = blobs(n_per=40, spread=0.8, seed=3)
    counts = [mean_shift(X, ClusterConfig(method="mean_shift", bandwidth=b)).k for b in np.linspace(0.3, 12, 25)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_auto_bandwidth_subsamples_deterministically():
    X = np.random.default_rng(0).standard_normal((2000, 3))
    assert auto_bandwidth(X, 5) == auto_bandwidth(X, 5)
    assert auto_bandwidth(X, 5) > 0


# -- shared properties --------------------------------------------------------


@pytest.mark.parametrize("method", ["kmeans_modified", "som", "gmm", "mean_shift"])
def test_determinism(method):
    X = blobs(n_per=30, spread=1.0, seed=9)
    cfg = ClusterConfig(method=method, k=3, seed=4, max_iter=50)
    a, b = fit_clusters(X, cfg), fit_clusters(X, cfg)
    assert np.array_equal(a.centers, b.centers)
    assert np.array_equal(a.assignments, b.assignments)
    assert a.sse == b.sse


@pytest.mark.parametrize("method", ["gmm", "mean_shift"])
def test_permutation_equivariance(method):
    X = blobs(n_per=40, spread=0.4, seed=11)
    perm = np.random.default_rng(2).permutation(len(X))
    cfg = ClusterConfig(method=method, k=3, bandwidth=2.0)
    a = fit_clusters(X, cfg)
    b = fit_clusters(X[perm], cfg)
    assert same_partition(a.assignments[perm], b.assignments)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.sampled_from(["kmeans_modified", "som", "mean_shift"]))
def test_assignments_are_nearest_center(seed, k, method):
    X = np.random.default_rng(seed).standard_normal((40, 3))
    m = fit_clusters(X, ClusterConfig(method=method, k=k, seed=seed, max_iter=30, bandwidth=1.0))
    assert_nearest_center(X, m)
    assert_sse_consistent(X, m)


def test_model_json(tmp_path):
    X = blobs(n_per=5)
    m = fit_clusters(X, ClusterConfig(k=3))
    obj = m.to_json(ids=[f"c{i}" for i in range(len(X))])
    assert obj["method"] == "kmeans_modified" and obj["k"] == 3
    assert obj["assignments"][0]["id"] == "c0"
    m.write_json(tmp_path / "m.json")
    assert (tmp_path / "m.json").stat().st_size > 0
    assert isinstance(m, ClusterModel)
