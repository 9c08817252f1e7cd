import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import naive_calinski_harabasz, naive_davies_bouldin, naive_silhouette

from custvec.clustering import ClusterConfig, ClusterModel, mean_shift
from custvec.dataset import Dataset, FeatureSchema
from custvec.evaluation import (
    DEGENERATE_SENTINEL,
    ConfusionCounts,
    accuracy,
    calinski_harabasz,
    classification_report,
    confusion,
    davies_bouldin,
    evaluate_classifier,
    evaluate_clustering,
    f1,
    knee_select_k,
    mse,
    precision,
    recall,
    silhouette,
)
from custvec.network import LayerSpec, NetworkParams

LINE = np.array([[0.0], [1.0], [10.0], [11.0]])
GOOD = [0, 0, 1, 1]
CROSSED = [0, 1, 0, 1]


# -- classification -----------------------------------------------------------


def test_confusion_examples():
    assert confusion([1, 0], [1, 0]) == ConfusionCounts(1, 1, 0, 0)
    assert confusion([1, 1], [0, 0]).fn == 2
    assert confusion([0, 1, 1, 0], [1, 1, 0, 0]) == ConfusionCounts(1, 1, 1, 1)
    with pytest.raises(ValueError):
        confusion([1], [1, 0])


def test_rate_examples():
    assert precision(ConfusionCounts(8, 0, 2, 0)) == 0.8
    assert recall(ConfusionCounts(8, 0, 0, 8)) == 0.5
    assert f1(ConfusionCounts(8, 0, 2, 8)) == pytest.approx(2 * 0.8 * 0.5 / 1.3)
    assert f1(ConfusionCounts(8, 0, 2, 8)) == pytest.approx(0.6154, abs=1e-4)


def test_zero_denominators_flagged():
    rep = classification_report([0, 0, 0], [0.1, 0.2, 0.3])
    assert rep.precision == rep.recall == rep.f1 == 0.0
    assert set(rep.degenerate) == {"precision", "recall", "f1"}


def test_mse_examples():
    assert mse([1, 0], [1, 0]) == 0
    assert mse([1, 0], [0.5, 0.5]) == 0.25
    assert mse([1], [0]) == 1
    with pytest.raises(ValueError):
        mse([1], [0, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_metric_identities(pairs):
    t, p = zip(*pairs)
    c = confusion(t, p)
    assert c.total == len(pairs)
    assert accuracy(c) * c.total == pytest.approx(c.tp + c.tn)
    pr, rc = precision(c), recall(c)
    for v in (accuracy(c), pr, rc, f1(c)):
        assert 0 <= v <= 1
    if pr > 0 and rc > 0:
        assert abs(f1(c) - 2 / (1 / pr + 1 / rc)) <= 1e-12


def _const_model(p_logit, dim=2):
    spec = LayerSpec(dim, 1, None)
    return spec, NetworkParams((np.zeros((1, dim)), np.zeros((1, 1))), (np.zeros(1), np.array([p_logit])))


def test_all_negative_predictor_on_skewed_data():
    y = np.r_[np.zeros(94), np.ones(6)].astype(int)
    d = Dataset(FeatureSchema(("a", "b"), "y"), np.arange(100), np.zeros((100, 2)), y, standardized=True)
    spec, params = _const_model(-5.0)
    rep = evaluate_classifier(params, spec, d)
    assert rep.accuracy == pytest.approx(0.94)
    assert rep.recall == 0.0
    with pytest.raises(ValueError):
        evaluate_classifier(params, spec, Dataset(d.schema, d.ids, d.X))


def test_perfect_predictor():
    rep = classification_report([1, 0, 1], [1 - 1e-13, 1e-13, 1 - 1e-13])
    assert rep.accuracy == 1 and rep.mse < 1e-20 and rep.f1 == 1


# -- validity indices ---------------------------------------------------------


# Outer points score (10.5 - 1) / 10.5 and inner points (9.5 - 1) / 9.5.
CANONICAL_SILHOUETTE = (9.5 / 10.5 + 8.5 / 9.5) / 2


def test_canonical_fixture():
    assert silhouette(LINE, GOOD) == pytest.approx(CANONICAL_SILHOUETTE, abs=1e-12)
    assert silhouette(LINE, GOOD) == pytest.approx(naive_silhouette(LINE, GOOD), abs=1e-12)
    assert calinski_harabasz(LINE, GOOD) == pytest.approx(200, abs=1e-6)
    assert davies_bouldin(LINE, GOOD) == pytest.approx(0.1, abs=1e-6)


def test_crossed_partition_is_worse_on_every_index():
    assert silhouette(LINE, CROSSED) < 0
    assert davies_bouldin(LINE, CROSSED) > 1
    assert calinski_harabasz(LINE, CROSSED) < calinski_harabasz(LINE, GOOD)
    assert davies_bouldin(LINE, CROSSED) > davies_bouldin(LINE, GOOD)


def test_overlapping_clouds_silhouette_near_zero():
    X = np.random.default_rng(0).standard_normal((400, 3))
    labels = np.random.default_rng(1).integers(0, 2, 400)
    assert abs(silhouette(X, labels)) < 0.1
    assert calinski_harabasz(X, labels) < 10


def test_equidistant_point_scores_zero():
    # point 1 is at distance 1 from its partner and mean 1 from the other cluster
    X = np.array([[0.0], [1.0], [2.0]])
    s = silhouette(X, [0, 0, 1])
    naive = naive_silhouette(X, [0, 0, 1])
    assert s == pytest.approx(naive)


def test_degenerate_sentinels():
    X = np.array([[0.0], [0.0], [5.0], [5.0]])
    assert calinski_harabasz(X, [0, 0, 1, 1]) == DEGENERATE_SENTINEL
    assert davies_bouldin(X, [0, 0, 1, 1]) == 0.0
    assert davies_bouldin(np.array([[0.0], [2.0], [0.0], [2.0]]), [0, 0, 1, 1]) == DEGENERATE_SENTINEL


def test_index_errors():
    with pytest.raises(ValueError):
        silhouette(LINE, [0, 0, 0, 0])
    with pytest.raises(ValueError):
        calinski_harabasz(LINE, [0, 1, 2, 3])
    with pytest.raises(ValueError):
        davies_bouldin(LINE, [0, 0, 0, 0])


def test_indices_match_naive_oracle():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 200:
        n = int(rng.integers(3, 8))
        k = int(rng.integers(2, n))
        labels = rng.integers(0, k, n)
        if len(set(labels.tolist())) < 2:
            continue
        X = rng.standard_normal((n, int(rng.integers(1, 4))))
        assert abs(silhouette(X, labels) - naive_silhouette(X, labels.tolist())) <= 1e-9
        if len(set(labels.tolist())) < n:
            ch = naive_calinski_harabasz(X, labels.tolist())
            assert abs(calinski_harabasz(X, labels) - ch) <= 1e-9 * max(1, ch)
        assert abs(davies_bouldin(X, labels) - naive_davies_bouldin(X, labels.tolist())) <= 1e-9
        checked += 1


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_silhouette_relabel_invariant(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((15, 3))
    labels = rng.integers(0, 3, 15)
    if len(set(labels.tolist())) < 2:
        return
    perm = rng.permutation(3)
    assert silhouette(X, labels) == pytest.approx(silhouette(X, perm[labels]), abs=1e-12)


def test_evaluate_clustering_report():
    model = ClusterModel("kmeans_modified", np.array([[0.5], [10.5]]), np.array(GOOD), 1.0, 1)
    rep = evaluate_clustering(LINE, model)
    assert rep.silhouette == pytest.approx(CANONICAL_SILHOUETTE, abs=1e-12)
    assert rep.calinski_harabasz == pytest.approx(200)
    assert rep.davies_bouldin == pytest.approx(0.1)
    assert rep.k == 2 and rep.sse == 1.0
    one = ClusterModel("kmeans_modified", np.array([[5.5]]), np.zeros(4, int), 0.0, 1)
    with pytest.raises(ValueError):
        evaluate_clustering(LINE, one)


def test_evaluate_mean_shift_reports_mode_count():
    X = np.array([[0.0], [0.1], [0.2], [10.0], [10.1]])
    m = mean_shift(X, ClusterConfig(method="mean_shift", bandwidth=1))
    assert evaluate_clustering(X, m).k == m.k == 2


# -- knee ---------------------------------------------------------------------


def test_knee_examples():
    assert knee_select_k([1, 2, 3, 4, 5], [100, 70, 30, 28, 27]).chosen_k == 3
    assert knee_select_k([1, 2, 3, 4, 5], [100, 40, 20, 18, 17]).chosen_k == 2
    linear = knee_select_k([1, 2, 3, 4, 5], [50, 40, 30, 20, 10])
    assert linear.chosen_k == 2
    assert max(linear.distances) < 1e-12


def test_knee_errors_and_flag():
    with pytest.raises(ValueError):
        knee_select_k([1, 2], [3, 1])
    with pytest.raises(ValueError):
        knee_select_k([1, 2, 3], [3, 1])
    r = knee_select_k([1, 2, 3, 4], [10, 3, 4, 1])
    assert r.monotonic is False
    assert r.chosen_k in r.candidate_ks


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0.1, 1e4), min_size=3, max_size=10),
    st.floats(1e-3, 1e3),
    st.floats(0.5, 5),
    st.integers(-10, 10),
)
def test_knee_scale_and_shift_invariant(curve, c, stretch, shift):
    curve = sorted(curve, reverse=True)
    ks = list(range(1, len(curve) + 1))
    base = knee_select_k(ks, curve)
    scaled = knee_select_k(ks, [c * v for v in curve])
    assert scaled.chosen_k == base.chosen_k
    moved = knee_select_k([stretch * k + shift for k in ks], curve)
    assert moved.chosen_k == pytest.approx(stretch * base.chosen_k + shift)
