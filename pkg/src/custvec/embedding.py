"""Customer vectors taken from the embedding layer, and similarity queries over them."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from custvec.dataset import Dataset, id_sort_key
from custvec.network import (
    AdamConfig,
    LayerSpec,
    NetworkParams,
    TrainConfig,
    TrainReport,
    fit_minibatch,
    forward,
)

METRICS = ("cosine", "euclidean")


@dataclass(frozen=True, eq=False)
class CustomerVector:
    id: object
    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.ndim != 1 or not np.isfinite(v).all():
            raise ValueError("customer vector must be a finite 1-D array")
        object.__setattr__(self, "v", v)


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Ordered customer vectors with optional labels.

    ``source_model`` points at whatever produced the vectors: the
    classifier's :class:`NetworkParams` or a :class:`LinearAutoencoder`.
    """

    ids: np.ndarray
    vectors: np.ndarray
    labels: np.ndarray | None = None
    source_model: object = None

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=object)
        V = np.asarray(self.vectors, dtype=float)
        if V.ndim != 2 or V.shape[0] != ids.shape[0]:
            raise ValueError("need one vector per id")
        if len(set(ids.tolist())) != len(ids):
            raise ValueError("ids must be unique")
        if not np.isfinite(V).all():
            raise ValueError("vectors must be finite")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "vectors", V)
        if self.labels is not None:
            object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        object.__setattr__(self, "_index", {k: i for i, k in enumerate(ids.tolist())})

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def index_of(self, id_) -> int:
        try:
            return self._index[id_]
        except KeyError:
            raise KeyError(f"unknown customer id {id_!r}") from None

    def __getitem__(self, id_) -> CustomerVector:
        return CustomerVector(id_, self.vectors[self.index_of(id_)])

    def __iter__(self):
        for i, v in zip(self.ids, self.vectors):
            yield CustomerVector(i, v)

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", *(f"v{j + 1}" for j in range(self.dim)), "label"])
            for i in range(len(self)):
                lab = "" if self.labels is None else str(int(self.labels[i]))
                w.writerow([str(self.ids[i]), *(repr(float(x)) for x in self.vectors[i]), lab])

    @classmethod
    def from_csv(cls, path) -> "EmbeddingSet":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[0] != "id" or header[-1] != "label" or len(header) < 3:
                raise ValueError(f"{path}: expected header id,v1,...,label")
            ids, rows, labels = [], [], []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise ValueError(f"{path}:{lineno}: expected {len(header)} cells")
                try:
                    rows.append([float(x) for x in row[1:-1]])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric vector entry") from None
                try:
                    ids.append(int(row[0]))
                except ValueError:
                    ids.append(row[0])
                labels.append(row[-1])
        lab = None
        if labels and all(x in ("0", "1") for x in labels):
            lab = np.array([int(x) for x in labels])
        V = np.array(rows, dtype=float).reshape(len(rows), len(header) - 2)
        return cls(np.array(ids, dtype=object), V, lab)

    def to_json(self) -> list[dict]:
        out = []
        for i in range(len(self)):
            item = {"id": self.ids[i], "v": self.vectors[i].tolist()}
            item["label"] = None if self.labels is None else int(self.labels[i])
            out.append(item)
        return out

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), default=str) + "\n", encoding="utf-8")


def embed(params: NetworkParams, spec: LayerSpec, x, id_=None, pre_activation: bool = False) -> CustomerVector:
    """Embedding-layer activations for one standardized feature vector.

    With ``pre_activation=True`` the affine output ``theta1 @ x + b1`` is
    returned instead of its activation.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("embed takes a single feature vector; use embed_all for tables")
    trace = forward(params, spec, x)
    return CustomerVector(id_, trace.a1 if pre_activation else trace.w1)


def embed_all(params: NetworkParams, spec: LayerSpec, data: Dataset, pre_activation: bool = False) -> EmbeddingSet:
    if not data.standardized:
        raise ValueError("embed_all expects data scaled with the training scaler")
    trace = forward(params, spec, data.X)
    V = trace.a1 if pre_activation else trace.w1
    return EmbeddingSet(data.ids, V, data.y, params)


def hidden_activations(params: NetworkParams, spec: LayerSpec, data: Dataset) -> np.ndarray:
    """First-hidden-layer outputs for every row (any width)."""
    return forward(params, spec, data.X).w1


def cosine_similarity(t, e) -> float:
    t = t.v if isinstance(t, CustomerVector) else np.asarray(t, dtype=float)
    e = e.v if isinstance(e, CustomerVector) else np.asarray(e, dtype=float)
    if t.shape != e.shape:
        raise ValueError("vectors differ in dimension")
    nt, ne = np.linalg.norm(t), np.linalg.norm(e)
    if nt == 0 or ne == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.dot(t, e) / (nt * ne))


def euclidean_distance(t, e) -> float:
    t = t.v if isinstance(t, CustomerVector) else np.asarray(t, dtype=float)
    e = e.v if isinstance(e, CustomerVector) else np.asarray(e, dtype=float)
    if t.shape != e.shape:
        raise ValueError("vectors differ in dimension")
    return float(np.linalg.norm(t - e))


def _scores(V: np.ndarray, q: np.ndarray, metric: str) -> np.ndarray:
    if metric == "cosine":
        nq = np.linalg.norm(q)
        if nq == 0:
            raise ValueError("cosine similarity is undefined for a zero query vector")
        norms = np.linalg.norm(V, axis=1)
        # zero vectors are treated as orthogonal to everything
        with np.errstate(invalid="ignore", divide="ignore"):
            s = V @ q / (norms * nq)
        return np.where(norms > 0, s, 0.0)
    if metric == "euclidean":
        return np.linalg.norm(V - q, axis=1)
    raise ValueError(f"metric must be one of {METRICS}")


def top_k_similar(es: EmbeddingSet, query_id, k: int, metric: str = "cosine") -> list[tuple]:
    """The ``k`` nearest other customers to ``query_id``.

    Cosine results come highest first, Euclidean results closest first;
    equal scores are ordered by ascending id.  Asking for more than
    ``len(es) - 1`` neighbours returns all of them.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    qi = es.index_of(query_id)
    scores = _scores(es.vectors, es.vectors[qi], metric)
    sign = -1.0 if metric == "cosine" else 1.0
    order = sorted(
        (i for i in range(len(es)) if i != qi),
        key=lambda i: (sign * scores[i], id_sort_key(es.ids[i])),
    )
    return [(es.ids[i], float(scores[i])) for i in order[:k]]


def similar_to_defaulters(es: EmbeddingSet, threshold: float, metric: str = "cosine") -> list[tuple]:
    """Non-defaulters that sit close to at least one known defaulter.

    Returns ``(id, best_score, witness_defaulter_id)`` in set order.  For
    cosine a row qualifies when its highest similarity to any defaulter is
    ``>= threshold``; for Euclidean when its smallest distance is
    ``<= threshold``.
    """
    if es.labels is None:
        raise ValueError("similar_to_defaulters needs labels")
    pos = np.flatnonzero(es.labels == 1)
    if len(pos) == 0:
        raise ValueError("no labeled defaulters in the set")
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    D = es.vectors[pos]
    out = []
    for i in np.flatnonzero(es.labels == 0):
        v = es.vectors[i]
        if metric == "cosine":
            if not np.linalg.norm(v) > 0:
                continue
            s = _scores(D, v, "cosine")
            j = int(np.argmax(s))
            hit = s[j] >= threshold
        else:
            s = _scores(D, v, "euclidean")
            j = int(np.argmin(s))
            hit = s[j] <= threshold
        if hit:
            out.append((es.ids[i], float(s[j]), es.ids[pos[j]]))
    return out


@dataclass(frozen=True, eq=False)
class LinearAutoencoder:
    """``code = W_enc (x - mu) + b_enc``, ``x_hat = W_dec code + b_dec + mu``."""

    mean: np.ndarray
    params: NetworkParams
    report: TrainReport
    reconstruction_mse: float

    def encode(self, A):
        W, b = self.params.weights[0], self.params.biases[0]
        return (np.asarray(A, dtype=float) - self.mean) @ W.T + b

    def decode(self, Z):
        W, b = self.params.weights[1], self.params.biases[1]
        return Z @ W.T + b + self.mean


def _ae_forward(p: NetworkParams, Xc):
    Z = Xc @ p.weights[0].T + p.biases[0]
    return Z, Z @ p.weights[1].T + p.biases[1]


def compress_30_to_3(activations, seed: int = 0, config: TrainConfig | None = None, ids=None, labels=None, code_dim: int = 3) -> EmbeddingSet:
    """Compress 30-wide hidden activations to 3-d codes with a linear autoencoder.

    The autoencoder ``30 -> 3 -> 30`` is trained on mean-squared
    reconstruction error with Adam and validation early stopping (a seeded
    80/20 row split of the activations).  Inputs are centered first.
    ``source_model`` of the result is the fitted :class:`LinearAutoencoder`.
    """
    A = np.asarray(activations, dtype=float)
    if A.ndim != 2 or A.shape[1] != 30:
        raise ValueError(f"expected 30-dimensional activations, got shape {A.shape}")
    n = A.shape[0]
    if n < 10:
        raise ValueError("need at least 10 vectors to train the compressor")
    if config is None:
        config = TrainConfig(epochs=200, optimizer=AdamConfig(lr=1e-2), early_stop_patience=10, seed=seed)
    mu = A.mean(axis=0)
    Xc = A - mu
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_val = max(1, n // 5)
    val_idx, tr_idx = order[:n_val], order[n_val:]
    Xt, Xv = Xc[tr_idx], Xc[val_idx]

    bound_e, bound_d = 1.0 / np.sqrt(A.shape[1]), 1.0 / np.sqrt(code_dim)
    p0 = NetworkParams(
        (rng.uniform(-bound_e, bound_e, (code_dim, A.shape[1])), rng.uniform(-bound_d, bound_d, (A.shape[1], code_dim))),
        (np.zeros(code_dim), np.zeros(A.shape[1])),
    )

    def mse(p, X):
        return float(np.mean((_ae_forward(p, X)[1] - X) ** 2))

    def grad_fn(p, idx):
        X = Xt[idx]
        Z, R = _ae_forward(p, X)
        m = X.shape[0]
        dR = 2.0 * (R - X) / (m * X.shape[1])
        dWd, dbd = dR.T @ Z, dR.sum(axis=0)
        dZ = dR @ p.weights[1]
        dWe, dbe = dZ.T @ X, dZ.sum(axis=0)
        return float(np.mean((R - X) ** 2)), NetworkParams((dWe, dWd), (dbe, dbd))

    def eval_fn(p):
        return mse(p, Xt), float("nan"), mse(p, Xv), float("nan")

    report = TrainReport()
    fit_minibatch(p0, grad_fn, eval_fn, len(tr_idx), config, report)
    best = report.best_params
    ae = LinearAutoencoder(mu, best, report, mse(best, Xc))
    if ids is None:
        ids = np.arange(n, dtype=object)
    return EmbeddingSet(ids, ae.encode(A), labels, ae)
