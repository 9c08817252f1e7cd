"""Loading, cleaning, scaling, oversampling and splitting customer tables."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MISSING_MARKERS = {"", "na"}
PERSONALITY_COLUMNS = ("EXT", "NEU", "AGR", "CON", "OPN")


def id_sort_key(value):
    """Ordering key that sorts integer ids numerically and the rest as text."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return (0, int(value), "")
    return (1, 0, str(value))


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple[str, ...]
    label_name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if any(not isinstance(n, str) or not n for n in self.names):
            raise ValueError("feature names must be non-empty strings")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        if self.label_name is not None and self.label_name in self.names:
            raise ValueError(f"label {self.label_name!r} is also listed as a feature")

    def __len__(self):
        return len(self.names)

    def to_json(self) -> dict:
        return {"features": list(self.names), "label": self.label_name}

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureSchema":
        return cls(tuple(obj["features"]), obj.get("label"))

    @classmethod
    def load(cls, path) -> "FeatureSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class CustomerRecord:
    id: object
    features: np.ndarray
    label: int | None = None


@dataclass(frozen=True)
class Scaler:
    """Per-column (mean, std) pairs fitted on a training table."""

    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    def __len__(self):
        return len(self.names)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        return Z * self.std + self.mean

    def to_json(self) -> list[dict]:
        return [
            {"name": n, "mean": float(m), "std": float(s)}
            for n, m, s in zip(self.names, self.mean, self.std)
        ]

    @classmethod
    def from_json(cls, items: Sequence[dict]) -> "Scaler":
        return cls(
            tuple(it["name"] for it in items),
            np.array([it["mean"] for it in items], dtype=float),
            np.array([it["std"] for it in items], dtype=float),
        )

    @classmethod
    def from_pairs(cls, pairs, names=None) -> "Scaler":
        pairs = list(pairs)
        if names is None:
            names = tuple(f"x{i}" for i in range(len(pairs)))
        return cls(
            tuple(names),
            np.array([p[0] for p in pairs], dtype=float),
            np.array([p[1] for p in pairs], dtype=float),
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """A customer table: feature matrix ``X`` (NaN = missing), ids and labels.

    Instances are treated as immutable; every operation returns a new one.
    """

    schema: FeatureSchema
    ids: np.ndarray
    X: np.ndarray
    y: np.ndarray | None = None
    standardized: bool = False
    scaler: Scaler | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.schema):
            raise ValueError(
                f"feature matrix shape {X.shape} does not match schema of {len(self.schema)} columns"
            )
        ids = np.asarray(self.ids, dtype=object)
        if ids.shape != (X.shape[0],):
            raise ValueError("one id per row is required")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "ids", ids)
        if self.y is not None:
            y = np.asarray(self.y)
            if y.shape != (X.shape[0],):
                raise ValueError("one label per row is required")
            if not np.isin(y, (0, 1)).all():
                raise ValueError("labels must be 0 or 1")
            object.__setattr__(self, "y", y.astype(np.int64))

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def labeled(self) -> bool:
        return self.y is not None

    @property
    def records(self) -> list[CustomerRecord]:
        labels = self.y if self.y is not None else [None] * len(self)
        return [
            CustomerRecord(i, row.copy(), None if lab is None else int(lab))
            for i, row, lab in zip(self.ids, self.X, labels)
        ]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.schema.names.index(name)]

    def take(self, index) -> "Dataset":
        index = np.asarray(index)
        if index.dtype != bool:
            index = index.astype(np.intp)
        return replace(
            self,
            ids=self.ids[index],
            X=self.X[index],
            y=None if self.y is None else self.y[index],
        )

    @classmethod
    def from_records(cls, schema: FeatureSchema, records: Iterable[CustomerRecord]) -> "Dataset":
        records = list(records)
        X = np.array([r.features for r in records], dtype=float).reshape(len(records), len(schema))
        labels = [r.label for r in records]
        y = None if any(lab is None for lab in labels) else np.array(labels)
        return cls(schema, np.array([r.id for r in records], dtype=object), X, y)


@dataclass(frozen=True)
class SplitSet:
    train: Dataset
    validation: Dataset
    test: Dataset


def _parse_id(raw: str):
    try:
        return int(raw)
    except ValueError:
        return raw


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Read a CSV with a header row into a :class:`Dataset`.

    Cells that are empty or ``NA`` (any case) become NaN.  An ``id`` column
    is used when present, otherwise the 0-based row index.  The label column
    is optional in the file; when present every value must be 0 or 1.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row expected") from None
        missing = [n for n in schema.names if n not in header]
        if missing:
            raise ValueError(f"{path}: header lacks columns {missing}")
        cols = [header.index(n) for n in schema.names]
        id_col = header.index("id") if "id" in header else None
        label_col = (
            header.index(schema.label_name)
            if schema.label_name is not None and schema.label_name in header
            else None
        )

        ids, rows, labels = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            values = []
            for name, c in zip(schema.names, cols):
                cell = row[c].strip()
                if cell.lower() in MISSING_MARKERS:
                    values.append(math.nan)
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: non-numeric value {cell!r} in column {name!r}"
                    ) from None
            rows.append(values)
            ids.append(_parse_id(row[id_col].strip()) if id_col is not None else len(ids))
            if label_col is not None:
                cell = row[label_col].strip()
                try:
                    lab = float(cell)
                except ValueError:
                    lab = math.nan
                if lab not in (0.0, 1.0):
                    raise ValueError(f"{path}:{lineno}: label {cell!r} is not 0 or 1")
                labels.append(int(lab))

    X = np.array(rows, dtype=float).reshape(len(rows), len(schema))
    y = np.array(labels, dtype=np.int64) if label_col is not None else None
    return Dataset(schema, np.array(ids, dtype=object), X, y)


def _format_float(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_csv(data: Dataset, path) -> None:
    """Write ``data`` so that :func:`load_csv` reads it back bit-exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["id", *data.schema.names]
    if data.y is not None:
        header.append(data.schema.label_name or "label")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(len(data)):
            row = [str(data.ids[i]), *(_format_float(v) for v in data.X[i])]
            if data.y is not None:
                row.append(str(int(data.y[i])))
            writer.writerow(row)


def join_on_keys(left: Dataset, right: Dataset, keys: Sequence[str]) -> Dataset:
    """Inner join on exact equality of the ``keys`` columns.

    When several right rows match one left row, their non-key columns are
    averaged.  Columns present on both sides keep the left value.
    """
    keys = list(keys)
    for k in keys:
        if k not in left.schema.names or k not in right.schema.names:
            raise ValueError(f"join key {k!r} must be a feature of both datasets")
    lk = np.column_stack([left.column(k) for k in keys])
    rk = np.column_stack([right.column(k) for k in keys])
    if np.isnan(lk).any() or np.isnan(rk).any():
        raise ValueError("join key columns must not contain missing values")

    extra = [n for n in right.schema.names if n not in keys and n not in left.schema.names]
    extra_idx = [right.schema.names.index(n) for n in extra]

    groups: dict[tuple, list[int]] = {}
    for j, key in enumerate(map(tuple, rk)):
        groups.setdefault(key, []).append(j)

    keep, merged = [], []
    for i, key in enumerate(map(tuple, lk)):
        matches = groups.get(key)
        if not matches:
            continue
        block = right.X[np.ix_(matches, extra_idx)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            merged.append(np.nanmean(block, axis=0) if len(extra_idx) else np.empty(0))
        keep.append(i)

    if not keep:
        warnings.warn("join_on_keys produced no rows", RuntimeWarning, stacklevel=2)
    schema = FeatureSchema(left.schema.names + tuple(extra), left.schema.label_name)
    right_block = np.array(merged, dtype=float).reshape(len(keep), len(extra))
    X = np.hstack([left.X[keep], right_block])
    y = None if left.y is None else left.y[keep]
    return Dataset(schema, left.ids[keep], X, y)


def impute_missing(data: Dataset) -> Dataset:
    """Replace each missing cell with the mean of its column's observed values."""
    X = data.X.copy()
    mask = np.isnan(X)
    if not mask.any():
        return replace(data, X=X)
    observed = (~mask).sum(axis=0)
    empty = [n for n, c in zip(data.schema.names, observed) if c == 0]
    if empty:
        raise ValueError(f"columns entirely missing: {empty}")
    means = np.nansum(X, axis=0) / observed
    X[mask] = np.broadcast_to(means, X.shape)[mask]
    return replace(data, X=X)


def fit_scaler(data: Dataset) -> Scaler:
    if np.isnan(data.X).any():
        raise ValueError("cannot fit a scaler on data with missing cells; impute first")
    mean = data.X.mean(axis=0)
    std = data.X.std(axis=0)
    # constant columns map to zero
    constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    std = np.where(constant, 1.0, std)
    return Scaler(data.schema.names, mean, std)


def standardize(data: Dataset) -> Dataset:
    """Center each column and scale to unit population variance."""
    scaler = fit_scaler(data)
    return replace(data, X=scaler.transform(data.X), standardized=True, scaler=scaler)


def apply_scaler(data: Dataset, scaler) -> Dataset:
    """Scale ``data`` with statistics fitted elsewhere (normally the train split).

    ``scaler`` is a :class:`Scaler` or a sequence of ``(mean, std)`` pairs.
    """
    if not isinstance(scaler, Scaler):
        scaler = Scaler.from_pairs(scaler, data.schema.names if len(scaler) == len(data.schema) else None)
    if len(scaler) != data.n_features:
        raise ValueError(f"scaler has {len(scaler)} columns, data has {data.n_features}")
    return replace(data, X=scaler.transform(data.X), standardized=True, scaler=scaler)


def split(data: Dataset, ratios=(0.6, 0.2, 0.2), seed: int = 0) -> SplitSet:
    """Seeded shuffle followed by a contiguous train/validation/test cut."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n = len(data)
    if n < 3:
        raise ValueError("need at least 3 records to split")
    order = np.random.default_rng(seed).permutation(n)
    n_val = max(1, round(n * ratios[1]))
    n_test = max(1, round(n * ratios[2]))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise ValueError("split leaves no training records")
    return SplitSet(
        data.take(order[:n_train]),
        data.take(order[n_train:n_train + n_val]),
        data.take(order[n_train + n_val:]),
    )


def _minority_neighbours(P: np.ndarray, k: int, chunk: int = 512) -> np.ndarray:
    """Indices of the ``k`` nearest other rows of ``P`` (Euclidean), per row."""
    m = P.shape[0]
    sq = np.einsum("ij,ij->i", P, P)
    out = np.empty((m, k), dtype=np.int64)
    for start in range(0, m, chunk):
        stop = min(start + chunk, m)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * P[start:stop] @ P.T
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        out[start:stop] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def smote_augment(data: Dataset, seed: int = 0, k_neighbors: int = 5, return_parents: bool = False):
    """Oversample the minority class with SMOTE until both labels are equally frequent.

    Each synthetic row is ``x + u * (nn - x)`` where ``x`` is a minority row
    drawn uniformly at random, ``nn`` one of its ``k_neighbors`` nearest
    minority neighbours and ``u ~ U[0, 1)``.  Synthetic rows are appended
    after the originals with ids ``"smote-<i>"``.

    Parameters
    ----------
    data : Dataset
        Standardized, labeled data containing both classes.
    seed : int
        Seed for the base-row, neighbour and interpolation draws.
    k_neighbors : int
        Neighbourhood size; the minority class must be larger than this.
    return_parents : bool
        Also return an ``(n_synthetic, 2)`` object array of
        ``(base_id, neighbour_id)`` for every synthetic row.
    """
    if not data.standardized:
        raise ValueError("smote_augment expects standardized data")
    if data.y is None:
        raise ValueError("smote_augment needs labels")
    counts = np.bincount(data.y, minlength=2)
    if counts.min() == 0:
        raise ValueError("smote_augment needs both labels present")
    minority = int(np.argmin(counts))
    n_new = int(counts.max() - counts.min())
    idx = np.flatnonzero(data.y == minority)
    if len(idx) <= k_neighbors:
        raise ValueError(
            f"minority class has {len(idx)} rows, need more than k_neighbors={k_neighbors}"
        )
    parents = np.empty((0, 2), dtype=object)
    if n_new == 0:
        return (data, parents) if return_parents else data

    P = data.X[idx]
    nbrs = _minority_neighbours(P, k_neighbors)
    rng = np.random.default_rng(seed)
    base = rng.integers(0, len(idx), size=n_new)
    pick = nbrs[base, rng.integers(0, k_neighbors, size=n_new)]
    u = rng.random(n_new)[:, None]
    synth = P[base] + u * (P[pick] - P[base])

    ids = np.concatenate([data.ids, np.array([f"smote-{i}" for i in range(n_new)], dtype=object)])
    out = replace(
        data,
        ids=ids,
        X=np.vstack([data.X, synth]),
        y=np.concatenate([data.y, np.full(n_new, minority)]),
    )
    if return_parents:
        parents = np.column_stack([data.ids[idx[base]], data.ids[idx[pick]]])
        return out, parents
    return out


def make_synthetic(
    n: int,
    dims: int,
    positive_fraction: float,
    separation: float,
    seed: int = 0,
    label_name: str = "loan_default",
) -> Dataset:
    """Two unit-variance Gaussian blobs, one per label.

    The class means differ by ``separation`` in every coordinate (offset
    ``separation * ones(dims)``), so their Euclidean distance is
    ``separation * sqrt(dims)``.  Exactly ``round(n * positive_fraction)``
    rows are positive, scattered in random order.
    """
    if n < 10 or dims < 1 or not 0 < positive_fraction < 1:
        raise ValueError("need n >= 10, dims >= 1 and 0 < positive_fraction < 1")
    n_pos = int(round(n * positive_fraction))
    if not 0 < n_pos < n:
        raise ValueError("positive_fraction leaves one class empty")
    rng = np.random.default_rng(seed)
    y = np.zeros(n, dtype=np.int64)
    y[rng.choice(n, n_pos, replace=False)] = 1
    X = rng.standard_normal((n, dims)) + (y[:, None] - 0.5) * separation
    schema = FeatureSchema(tuple(f"f{i}" for i in range(dims)), label_name)
    return Dataset(schema, np.arange(n, dtype=object), X, y)
