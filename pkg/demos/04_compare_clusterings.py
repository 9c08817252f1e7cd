"""Cluster embedded customers four ways and choose k from the SSE knee.

Run with ``python3 demos/04_compare_clusterings.py``.
"""

import numpy as np

from custvec.clustering import ClusterConfig, fit_clusters, mean_shift
from custvec.dataset import Dataset, FeatureSchema, SplitSet, apply_scaler, fit_scaler, split
from custvec.embedding import embed_all
from custvec.evaluation import evaluate_clustering, knee_select_k
from custvec.network import LayerSpec, TrainConfig, train


def three_segments(seed=0, dims=6, n_per=500):
    """Three customer segments with default rates 10%, 50% and 90%."""
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((3, dims))
    means *= 20.0 / np.linalg.norm(means, axis=1, keepdims=True)
    segment = np.repeat([0, 1, 2], n_per)
    X = rng.standard_normal((3 * n_per, dims)) + means[segment]
    y = (rng.random(3 * n_per) < np.array([0.1, 0.5, 0.9])[segment]).astype(np.int64)
    return Dataset(FeatureSchema(tuple(f"f{i}" for i in range(dims)), "default"), np.arange(3 * n_per), X, y)


def main():
    data = three_segments()
    parts = split(data, (0.6, 0.2, 0.2), seed=0)
    scaler = fit_scaler(parts.train)
    spec = LayerSpec(6)
    report = train(SplitSet(*(apply_scaler(p, scaler) for p in (parts.train, parts.validation, parts.test))),
                   spec, TrainConfig(seed=0))
    V = embed_all(report.best_params, spec, apply_scaler(data, scaler)).vectors

    ks = [1, 2, 3, 4, 5, 6]
    curve = [fit_clusters(V, ClusterConfig(k=k)).sse for k in ks]
    knee = knee_select_k(ks, curve)
    print("k-means SSE by k: " + ", ".join(f"{k}:{s:.1f}" for k, s in zip(ks, curve)))
    print(f"knee of the SSE curve: k = {knee.chosen_k}")

    print(f"{'method':>16} {'k':>2} {'silhouette':>10} {'CH':>10} {'DBI':>7}")
    for method in ("kmeans_modified", "som", "gmm"):
        cfg = ClusterConfig(method=method, k=knee.chosen_k, max_iter=30 if method == "som" else 300)
        r = evaluate_clustering(V, fit_clusters(V, cfg))
        print(f"{method:>16} {r.k:>2} {r.silhouette:>10.4f} {r.calinski_harabasz:>10.1f} {r.davies_bouldin:>7.4f}")
    ms = mean_shift(V, ClusterConfig(method="mean_shift"))
    r = evaluate_clustering(V, ms)
    print(f"{'mean_shift':>16} {r.k:>2} {r.silhouette:>10.4f} {r.calinski_harabasz:>10.1f} {r.davies_bouldin:>7.4f}")
    print(f"mean shift found {ms.k} modes without being told k (bandwidth {ms.bandwidth:.3f})")


if __name__ == "__main__":
    main()
