"""Prepare an imbalanced customer table: split, scale on train only, then oversample.

Run with ``python3 demos/01_prepare_data.py``.
"""

import numpy as np

from custvec.dataset import apply_scaler, fit_scaler, make_synthetic, smote_augment, split


def main():
    # 6% defaulters, the same imbalance the loan data shows
    data = make_synthetic(5000, 63, 0.06, 1.0, seed=0)
    print(f"raw table: {data.X.shape[0]} customers x {data.X.shape[1]} features, "
          f"{int(data.y.sum())} defaulters")

    parts = split(data, (0.6, 0.2, 0.2), seed=0)
    scaler = fit_scaler(parts.train)
    train, val, test = (apply_scaler(p, scaler) for p in (parts.train, parts.validation, parts.test))
    for name, d in (("train", train), ("validation", val), ("test", test)):
        print(f"{name:>10}: {len(d.ids):5d} rows, positive rate {d.y.mean():.3f}")

    # scaling statistics come from the training rows, so train is exactly centred
    print(f"train feature means within {np.abs(train.X.mean(axis=0)).max():.1e} of zero")
    print(f"test feature means drift up to {np.abs(test.X.mean(axis=0)).max():.3f}")

    balanced = smote_augment(train, seed=0)
    counts = np.bincount(balanced.y)
    print(f"after SMOTE: {len(balanced.ids)} training rows, class counts {counts.tolist()}")
    print("validation and test rows are never oversampled")


if __name__ == "__main__":
    main()
