"""Classification metrics, cluster validity indices and knee-based choice of k."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from custvec.network import LayerSpec, NetworkParams, loss, predict_proba

DEGENERATE_SENTINEL = 1e12


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(y_true, y_pred) -> ConfusionCounts:
    t = np.asarray(y_true).astype(np.int64).ravel()
    p = np.asarray(y_pred).astype(np.int64).ravel()
    if t.shape != p.shape:
        raise ValueError("y_true and y_pred differ in length")
    if t.size == 0:
        raise ValueError("nothing to evaluate")
    return ConfusionCounts(
        tp=int(np.sum((t == 1) & (p == 1))),
        tn=int(np.sum((t == 0) & (p == 0))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
    )


def accuracy(c: ConfusionCounts) -> float:
    return (c.tp + c.tn) / c.total if c.total else 0.0


def precision(c: ConfusionCounts) -> float:
    d = c.tp + c.fp
    return c.tp / d if d else 0.0


def recall(c: ConfusionCounts) -> float:
    d = c.tp + c.fn
    return c.tp / d if d else 0.0


def f1(c: ConfusionCounts) -> float:
    p, r = precision(c), recall(c)
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def mse(y_true, y_pred) -> float:
    t = np.asarray(y_true, dtype=float).ravel()
    p = np.asarray(y_pred, dtype=float).ravel()
    if t.shape != p.shape:
        raise ValueError("y_true and y_pred differ in length")
    return float(np.mean((t - p) ** 2))


@dataclass
class ClassificationReport:
    accuracy: float
    mse: float
    loss: float
    precision: float
    recall: float
    f1: float
    counts: ConfusionCounts | None = None
    # names of metrics whose denominator was zero (reported as 0)
    degenerate: list = field(default_factory=list)

    def to_json(self) -> dict:
        d = asdict(self)
        if self.counts is not None:
            d["counts"] = asdict(self.counts)
        return d


def classification_report(y_true, proba, threshold: float = 0.5) -> ClassificationReport:
    y = np.asarray(y_true).astype(np.int64).ravel()
    p = np.asarray(proba, dtype=float).ravel()
    c = confusion(y, (p >= threshold).astype(np.int64))
    degenerate = []
    if c.tp + c.fp == 0:
        degenerate.append("precision")
    if c.tp + c.fn == 0:
        degenerate.append("recall")
    if precision(c) + recall(c) == 0:
        degenerate.append("f1")
    return ClassificationReport(
        accuracy=accuracy(c),
        mse=mse(y, p),
        loss=loss(p, y),
        precision=precision(c),
        recall=recall(c),
        f1=f1(c),
        counts=c,
        degenerate=degenerate,
    )


def evaluate_classifier(params: NetworkParams, spec: LayerSpec, data, threshold: float = 0.5) -> ClassificationReport:
    """Score a trained classifier on a labeled, standardized :class:`Dataset`.

    ``mse`` compares labels with the predicted probabilities and ``loss`` is
    the mean binary cross-entropy.
    """
    if data.y is None:
        raise ValueError("evaluate_classifier needs labeled data")
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie strictly between 0 and 1")
    return classification_report(data.y, predict_proba(params, spec, data.X), threshold)


def _labels(assignments):
    """Compact arbitrary cluster labels to 0..k-1."""
    _, lab = np.unique(np.asarray(assignments), return_inverse=True)
    return lab.ravel()


def _prepare(points, assignments):
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    lab = _labels(assignments)
    if lab.shape[0] != X.shape[0]:
        raise ValueError("one assignment per point is required")
    return X, lab, int(lab.max()) + 1 if lab.size else 0


def silhouette(points, assignments) -> float:
    """Mean silhouette width with Euclidean distances.

    Points alone in their cluster score 0.
    """
    X, lab, k = _prepare(points, assignments)
    if k < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    D = cdist(X, X)
    sizes = np.bincount(lab, minlength=k)
    # per-point sum of distances to each cluster
    sums = np.stack([D[:, lab == j].sum(axis=1) for j in range(k)], axis=1)
    own = sizes[lab]
    a = sums[np.arange(len(X)), lab] / np.maximum(own - 1, 1)
    means = sums / sizes
    means[np.arange(len(X)), lab] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own == 1] = 0.0
    return float(s.mean())


def _scatter(X, lab, k):
    cents = np.array([X[lab == j].mean(axis=0) for j in range(k)])
    return cents


def calinski_harabasz(points, assignments) -> float:
    """Between/within dispersion ratio; returns 1e12 when the within term is zero."""
    X, lab, k = _prepare(points, assignments)
    n = X.shape[0]
    if not 2 <= k < n:
        raise ValueError("calinski_harabasz needs 2 <= k < n")
    cents = _scatter(X, lab, k)
    sizes = np.bincount(lab, minlength=k)
    ssb = float((sizes * ((cents - X.mean(axis=0)) ** 2).sum(axis=1)).sum())
    ssw = float(((X - cents[lab]) ** 2).sum())
    if ssw == 0:
        return DEGENERATE_SENTINEL
    return (ssb / (k - 1)) / (ssw / (n - k))


def davies_bouldin(points, assignments) -> float:
    """Mean over clusters of the worst (s_i + s_j) / d_ij ratio; 1e12 if two centroids coincide."""
    X, lab, k = _prepare(points, assignments)
    if k < 2:
        raise ValueError("davies_bouldin needs at least 2 clusters")
    cents = _scatter(X, lab, k)
    s = np.array([np.linalg.norm(X[lab == j] - cents[j], axis=1).mean() for j in range(k)])
    d = cdist(cents, cents)
    if np.any(d[~np.eye(k, dtype=bool)] == 0):
        return DEGENERATE_SENTINEL
    with np.errstate(divide="ignore", invalid="ignore"):
        R = (s[:, None] + s[None, :]) / d
    np.fill_diagonal(R, -np.inf)
    return float(R.max(axis=1).mean())


@dataclass
class ClusterValidityReport:
    silhouette: float
    calinski_harabasz: float
    davies_bouldin: float
    k: int
    sse: float
    degenerate: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def evaluate_clustering(points, model) -> ClusterValidityReport:
    """All three validity indices for a fitted :class:`ClusterModel`.

    ``k`` is the model's number of centers (for mean-shift, the number of
    modes it found).
    """
    X, lab, k_used = _prepare(points, model.assignments)
    if model.k < 2 or k_used < 2:
        raise ValueError("evaluate_clustering needs a model with at least 2 populated clusters")
    ch = calinski_harabasz(X, lab) if k_used < X.shape[0] else DEGENERATE_SENTINEL
    dbi = davies_bouldin(X, lab)
    degenerate = [name for name, v in (("calinski_harabasz", ch), ("davies_bouldin", dbi)) if v == DEGENERATE_SENTINEL]
    return ClusterValidityReport(silhouette(X, lab), ch, dbi, model.k, float(model.sse), degenerate)


@dataclass
class KneeResult:
    candidate_ks: list
    sse_curve: list
    chosen_k: int
    distances: list = field(default_factory=list)
    monotonic: bool = True

    def to_json(self) -> dict:
        return asdict(self)


def knee_select_k(candidate_ks, sse_curve) -> KneeResult:
    """Pick k where the SSE curve bends most.

    Both axes are min-max normalized, then the interior point farthest (in
    perpendicular distance) from the chord joining the first and last
    points wins; near-ties (1e-12) go to the smaller k.  Curves that are not
    non-increasing are accepted and flagged via ``monotonic=False``.
    """
    ks = np.asarray(candidate_ks, dtype=float)
    ys = np.asarray(sse_curve, dtype=float)
    if ks.shape != ys.shape or ks.ndim != 1:
        raise ValueError("candidate_ks and sse_curve must be equal-length sequences")
    if len(ks) < 3:
        raise ValueError("knee detection needs at least 3 points")
    order = np.argsort(ks, kind="stable")
    ks, ys = ks[order], ys[order]
    kx = (ks - ks[0]) / (ks[-1] - ks[0]) if ks[-1] != ks[0] else np.zeros_like(ks)
    span = ys.max() - ys.min()
    yy = (ys - ys.min()) / span if span > 0 else np.zeros_like(ys)
    x0, y0, x1, y1 = kx[0], yy[0], kx[-1], yy[-1]
    norm = np.hypot(x1 - x0, y1 - y0)
    dist = np.abs((y1 - y0) * kx - (x1 - x0) * yy + x1 * y0 - y1 * x0) / norm if norm > 0 else np.zeros_like(kx)
    interior = dist[1:-1]
    best = interior.max()
    pick = 1 + int(np.flatnonzero(interior >= best - 1e-12)[0])
    return KneeResult(
        candidate_ks=[int(k) if float(k).is_integer() else float(k) for k in ks],
        sse_curve=ys.tolist(),
        chosen_k=int(ks[pick]) if float(ks[pick]).is_integer() else float(ks[pick]),
        distances=dist.tolist(),
        monotonic=bool(np.all(np.diff(ys) <= 0)),
    )
