"""Query customer vectors: nearest neighbours and look-alikes of known defaulters.

Run with ``python3 demos/03_similarity.py``.
"""

from custvec.dataset import SplitSet, apply_scaler, fit_scaler, make_synthetic, smote_augment, split
from custvec.embedding import cosine_similarity, embed_all, similar_to_defaulters, top_k_similar
from custvec.network import LayerSpec, TrainConfig, train


def main():
    data = make_synthetic(3000, 20, 0.1, 0.6, seed=2)
    parts = split(data, (0.6, 0.2, 0.2), seed=2)
    scaler = fit_scaler(parts.train)
    tr, va, te = (apply_scaler(p, scaler) for p in (parts.train, parts.validation, parts.test))
    spec = LayerSpec(20)
    report = train(SplitSet(smote_augment(tr, seed=2), va, te), spec, TrainConfig(seed=2))
    vectors = embed_all(report.best_params, spec, apply_scaler(data, scaler))

    query = vectors.ids[0]
    print(f"five customers most like customer {query} (label {vectors.labels[0]}):")
    for cid, score in top_k_similar(vectors, query, 5):
        print(f"  {cid}: cosine {score:.4f}")
    print("same query by euclidean distance:")
    for cid, dist in top_k_similar(vectors, query, 5, metric="euclidean"):
        print(f"  {cid}: distance {dist:.4f}")

    a, b = vectors.vectors[0], vectors.vectors[1]
    print(f"cosine is symmetric: {cosine_similarity(a, b):.6f} == {cosine_similarity(b, a):.6f}")

    for threshold in (0.9, 0.99, 0.999):
        hits = similar_to_defaulters(vectors, threshold)
        flagged = [h for h in hits if h[0] in set(vectors.ids[vectors.labels == 0].tolist())]
        print(f"threshold {threshold}: {len(flagged)} non-defaulters look like a known defaulter")


if __name__ == "__main__":
    main()
