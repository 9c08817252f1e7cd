"""Train the 63-3-10-1 classifier and read customer vectors off its first layer.

Run with ``python3 demos/02_train_and_embed.py``.
"""

import numpy as np

from custvec.dataset import SplitSet, apply_scaler, fit_scaler, make_synthetic, smote_augment, split
from custvec.embedding import embed_all
from custvec.evaluation import evaluate_classifier
from custvec.network import LayerSpec, TrainConfig, train


def main():
    data = make_synthetic(5000, 63, 0.06, 0.5, seed=1)
    parts = split(data, (0.6, 0.2, 0.2), seed=1)
    scaler = fit_scaler(parts.train)
    tr, va, te = (apply_scaler(p, scaler) for p in (parts.train, parts.validation, parts.test))

    spec = LayerSpec(63)
    report = train(SplitSet(smote_augment(tr, seed=1), va, te), spec, TrainConfig(seed=1))
    print(f"trained {report.stopped_epoch} epochs, best validation loss at epoch {report.best_epoch}")
    for epoch, (tl, vl) in enumerate(zip(report.train_loss, report.val_loss), start=1):
        if epoch == 1 or epoch % 5 == 0 or epoch == len(report.val_loss):
            print(f"  epoch {epoch:3d}  train loss {tl:.4f}  validation loss {vl:.4f}")

    m = evaluate_classifier(report.best_params, spec, te)
    print(f"test accuracy {m.accuracy:.3f}  precision {m.precision:.3f}  recall {m.recall:.3f}  f1 {m.f1:.3f}")

    vectors = embed_all(report.best_params, spec, te)
    print(f"{len(vectors)} customer vectors of dimension {vectors.dim}")
    for label in (0, 1):
        centroid = vectors.vectors[vectors.labels == label].mean(axis=0)
        print(f"  mean vector of class {label}: {np.round(centroid, 3).tolist()}")


if __name__ == "__main__":
    main()
