"""Clustering of customer vectors.

Four methods share one config/result pair: a restarting k-means variant,
a 1-D self-organizing map, a full-covariance Gaussian mixture fitted by
EM, and flat-kernel mean-shift.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist
from scipy.special import logsumexp

METHODS = ("kmeans_modified", "som", "gmm", "mean_shift")


@dataclass(frozen=True)
class ClusterConfig:
    method: str = "kmeans_modified"
    k: int = 3
    seed: int = 0
    max_iter: int = 300
    tol: float = 1e-6
    bandwidth: float = 0.0
    max_restarts: int = 20
    gmm_reg: float = 1e-6

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.method != "mean_shift" and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.tol <= 0 or self.max_iter < 1 or self.max_restarts < 1:
            raise ValueError("need tol > 0, max_iter >= 1 and max_restarts >= 1")
        if self.bandwidth < 0:
            raise ValueError("bandwidth must be positive (or 0 for automatic)")


@dataclass(eq=False)
class ClusterModel:
    method: str
    centers: np.ndarray
    assignments: np.ndarray
    sse: float
    iterations_used: int
    covariances: np.ndarray | None = None
    weights: np.ndarray | None = None
    restarts: int = 0
    log_likelihood: list = field(default_factory=list)
    bandwidth: float | None = None

    @property
    def k(self) -> int:
        return len(self.centers)

    def to_json(self, ids=None) -> dict:
        ids = list(range(len(self.assignments))) if ids is None else list(ids)
        out = {
            "method": self.method,
            "k": self.k,
            "centers": self.centers.tolist(),
            "assignments": [{"id": i, "cluster": int(a)} for i, a in zip(ids, self.assignments)],
            "sse": self.sse,
            "iterations_used": self.iterations_used,
        }
        if self.covariances is not None:
            out["covariances"] = self.covariances.tolist()
            out["weights"] = self.weights.tolist()
        if self.bandwidth is not None:
            out["bandwidth"] = self.bandwidth
        if self.method == "kmeans_modified":
            out["restarts"] = self.restarts
        return out

    def write_json(self, path, ids=None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(ids), fh, indent=1, default=str)
            fh.write("\n")


def _as_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a non-empty (n, d) array of points")
    return X


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def sse(points, centers, assignments) -> float:
    """Sum of squared distances from each point to its assigned center."""
    X = _as_points(points)
    C = np.asarray(centers, dtype=float).reshape(-1, X.shape[1])
    a = np.asarray(assignments, dtype=np.int64)
    if a.shape != (X.shape[0],):
        raise ValueError("one assignment per point is required")
    if a.size and (a.min() < 0 or a.max() >= len(C)):
        raise IndexError("assignment refers to a missing center")
    return float(((X - C[a]) ** 2).sum())


def _reseed_empty(X, C, assign):
    """Move centers that own no points onto the worst-served point."""
    k = len(C)
    for j in range(k):
        if not np.any(assign == j):
            far = int(np.argmax(((X - C[assign]) ** 2).sum(axis=1)))
            C[j] = X[far]
            assign = np.argmin(_sq_dists(X, C), axis=1)
    return C, assign


def _restart_condition(X, C, assign) -> bool:
    """True when some cluster's farthest member lies farther from its center
    than that center lies from its nearest other center."""
    k = len(C)
    if k < 2:
        return False
    cc = np.sqrt(_sq_dists(C, C))
    np.fill_diagonal(cc, np.inf)
    nearest_other = cc.min(axis=1)
    d = np.sqrt(((X - C[assign]) ** 2).sum(axis=1))
    for j in range(k):
        members = d[assign == j]
        if members.size and members.max() > nearest_other[j]:
            return True
    return False


def _lloyd(X, C, max_iter, tol, check_restart):
    """Assign / (optionally) test / update until the centers stop moving.

    Returns ``(centers, assignments, iterations, fired)``; with
    ``check_restart`` the loop stops early with ``fired=True`` as soon as the
    restart condition holds.
    """
    C = C.copy()
    it = 0
    while True:
        it += 1
        assign = np.argmin(_sq_dists(X, C), axis=1)
        C, assign = _reseed_empty(X, C, assign)
        if check_restart and _restart_condition(X, C, assign):
            return C, assign, it, True
        # a center left without points (possible with duplicate points) stays put
        new = np.array([X[assign == j].mean(axis=0) if np.any(assign == j) else C[j] for j in range(len(C))])
        moved = np.abs(new - C).max()
        C = new
        if moved <= tol or it >= max_iter:
            break
    assign = np.argmin(_sq_dists(X, C), axis=1)
    return C, assign, it, False


def _hartigan(X, C, assign, max_pass=100):
    """Single-point transfers that lower SSE (Hartigan's rule) until none is left.

    Moving ``x`` from cluster ``a`` (size ``n_a``) to ``b`` changes SSE by
    ``n_b/(n_b+1)*|x-c_b|^2 - n_a/(n_a-1)*|x-c_a|^2``.  A partition stable
    under these moves is also stable under a Lloyd step.
    """
    k = len(C)
    assign = assign.copy()
    counts = np.bincount(assign, minlength=k).astype(float)
    C = C.copy()
    for _ in range(max_pass):
        d = _sq_dists(X, C)
        own = counts[assign]
        with np.errstate(divide="ignore", invalid="ignore"):
            leave = np.where(own > 1, own / (own - 1), np.inf) * d[np.arange(len(X)), assign]
        join = counts / (counts + 1) * d
        join[np.arange(len(X)), assign] = np.inf
        candidates = np.flatnonzero(join.min(axis=1) < leave * (1 - 1e-12))
        if candidates.size == 0:
            break
        for i in candidates:
            a = assign[i]
            if counts[a] <= 1:
                continue
            di = ((C - X[i]) ** 2).sum(axis=1)
            gain = counts / (counts + 1) * di
            gain[a] = np.inf
            b = int(np.argmin(gain))
            if gain[b] < counts[a] / (counts[a] - 1) * di[a] * (1 - 1e-12):
                C[a] = (C[a] * counts[a] - X[i]) / (counts[a] - 1)
                C[b] = (C[b] * counts[b] + X[i]) / (counts[b] + 1)
                counts[a] -= 1
                counts[b] += 1
                assign[i] = b
        C = np.array([X[assign == j].mean(axis=0) if counts[j] else C[j] for j in range(k)])
    return C, assign


def kmeans_modified(points, config: ClusterConfig = ClusterConfig(), init_centers=None) -> ClusterModel:
    """K-means with a restart test on the center layout.

    Every attempt draws ``k`` distinct data points as centers and loops
    assign -> test -> update.  The test fails when some cluster's farthest
    member is farther from its center than that center is from its nearest
    other center; the attempt then counts as a restart, and its draw is
    still run to convergence as plain Lloyd so it can serve as a fallback.
    Each converged partition is polished with Hartigan single-point moves.

    All ``max_restarts`` draws are tried and the lowest-SSE partition wins.
    ``restarts`` on the result counts the draws that failed the test.
    ``init_centers`` replaces the first draw.
    """
    X = _as_points(points)
    k = config.k
    distinct = np.unique(X, axis=0)
    if k > len(distinct):
        raise ValueError(f"k={k} exceeds the {len(distinct)} distinct points")
    rng = np.random.default_rng(config.seed)
    best = None
    total_iter, restarts = 0, 0
    for attempt in range(config.max_restarts):
        if attempt == 0 and init_centers is not None:
            C0 = np.asarray(init_centers, dtype=float).reshape(k, X.shape[1])
        else:
            C0 = distinct[np.sort(rng.choice(len(distinct), k, replace=False))]
        C, assign, it, fired = _lloyd(X, C0, config.max_iter, config.tol, check_restart=True)
        total_iter += it
        if fired:
            restarts += 1
            C, assign, it, _ = _lloyd(X, C0, config.max_iter, config.tol, check_restart=False)
            total_iter += it
        C, assign = _hartigan(X, C, assign)
        cand = (sse(X, C, assign), C, assign)
        if best is None or cand[0] < best[0]:
            best = cand
    s, C, assign = best
    return ClusterModel("kmeans_modified", C, assign, s, total_iter, restarts=restarts)


def som_cluster(points, config: ClusterConfig = ClusterConfig(method="som")) -> ClusterModel:
    """1 x k Kohonen chain.

    Online phase: ``max_iter`` passes over the data in seeded random order;
    the best-matching node and its chain neighbours (Gaussian neighbourhood)
    move toward each sample.  Learning rate starts at 0.5 and radius at
    ``k/2``; both decay as ``exp(-t/T)`` with ``T = max_iter * n``.

    Refinement phase: batch-SOM updates at the final radius until no node
    moves more than ``tol``, which pins the nodes to neighbourhood-weighted
    means instead of leaving them jittering around the last samples.
    """
    X = _as_points(points)
    n, k = X.shape[0], config.k
    rng = np.random.default_rng(config.seed)
    nodes = X[rng.choice(n, k, replace=n < k)].copy()
    grid = np.arange(k, dtype=float)
    lr0, r0 = 0.5, max(k / 2.0, 1e-3)
    T = float(config.max_iter * n)

    gd = (grid[:, None] - grid[None, :]) ** 2
    t = 0
    for _ in range(config.max_iter):
        order = rng.permutation(n)
        decay = np.exp(-(t + np.arange(n)) / T)
        lr = lr0 * decay
        coef = -1.0 / (2.0 * (r0 * decay) ** 2)
        for s, i in enumerate(order):
            diff = X[i] - nodes
            bmu = np.argmin(np.einsum("ij,ij->i", diff, diff))
            nodes += (lr[s] * np.exp(gd[bmu] * coef[s]))[:, None] * diff
        t += n

    radius = r0 * np.exp(-t / T)
    H = np.exp(-((grid[:, None] - grid[None, :]) ** 2) / (2.0 * radius * radius))
    it = 0
    for it in range(1, config.max_iter + 1):
        bmu = np.argmin(_sq_dists(X, nodes), axis=1)
        W = H[:, bmu]  # node x sample neighbourhood weights
        new = W @ X / W.sum(axis=1, keepdims=True)
        moved = np.abs(new - nodes).max()
        nodes = new
        if moved <= config.tol:
            break

    assign = np.argmin(_sq_dists(X, nodes), axis=1)
    nodes, assign = _reseed_empty(X, nodes, assign)
    return ClusterModel("som", nodes, assign, sse(X, nodes, assign), config.max_iter + it)


def _gauss_logpdf(X, mean, cov):
    L = np.linalg.cholesky(cov)
    z = np.linalg.solve(L, (X - mean).T)
    d = X.shape[1]
    return -0.5 * (z * z).sum(axis=0) - np.log(np.diag(L)).sum() - 0.5 * d * np.log(2 * np.pi)


def _regularize(cov, reg):
    """Lift eigenvalues below ``reg`` up to ``reg``; well-conditioned covariances pass unchanged."""
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() >= reg:
        return cov
    vals = np.maximum(vals, reg)
    return (vecs * vals) @ vecs.T


def _log_resp(X, weights, means, covs):
    k = len(weights)
    L = np.empty((X.shape[0], k))
    for j in range(k):
        try:
            L[:, j] = np.log(weights[j]) + _gauss_logpdf(X, means[j], covs[j])
        except np.linalg.LinAlgError:
            raise ValueError(f"covariance of component {j} is singular beyond regularization") from None
    norm = logsumexp(L, axis=1)
    return L - norm[:, None], float(norm.mean())


def _m_step(X, R, reg):
    Nk = R.sum(axis=0) + 10 * np.finfo(float).eps
    weights = Nk / X.shape[0]
    means = (R.T @ X) / Nk[:, None]
    covs = np.empty((len(Nk), X.shape[1], X.shape[1]))
    for j in range(len(Nk)):
        D = X - means[j]
        covs[j] = _regularize((R[:, j, None] * D).T @ D / Nk[j], reg)
    return weights, means, covs


def gmm_em(points, config: ClusterConfig = ClusterConfig(method="gmm")) -> ClusterModel:
    """Full-covariance Gaussian mixture fitted by EM.

    Initial responsibilities are the hard assignments of a
    :func:`kmeans_modified` run with the same seed.  Iteration stops when the
    mean per-point log-likelihood gains less than ``tol``.  The recorded
    ``log_likelihood`` history is that per-point mean, one entry per
    evaluated parameter set.
    """
    X = _as_points(points)
    k = config.k
    km = kmeans_modified(X, replace(config, method="kmeans_modified"))
    R = np.zeros((X.shape[0], k))
    R[np.arange(X.shape[0]), km.assignments] = 1.0
    weights, means, covs = _m_step(X, R, config.gmm_reg)

    log_r, ll = _log_resp(X, weights, means, covs)
    history = [ll]
    it = 0
    for it in range(1, config.max_iter + 1):
        weights, means, covs = _m_step(X, np.exp(log_r), config.gmm_reg)
        log_r, ll = _log_resp(X, weights, means, covs)
        history.append(ll)
        if ll - history[-2] < config.tol:
            break

    assign = np.argmax(log_r, axis=1)
    return ClusterModel(
        "gmm", means, assign, sse(X, means, assign), it,
        covariances=covs, weights=weights, log_likelihood=history,
    )


def auto_bandwidth(X, seed: int = 0, sample: int = 500) -> float:
    """Half the median pairwise distance of a seeded subsample (at most ``sample`` points)."""
    X = _as_points(X)
    rng = np.random.default_rng(seed)
    if X.shape[0] > sample:
        X = X[np.sort(rng.choice(X.shape[0], sample, replace=False))]
    if X.shape[0] < 2:
        return 1.0
    bw = float(np.median(pdist(X))) / 2.0
    return bw if bw > 0 else 1.0


def mean_shift(points, config: ClusterConfig = ClusterConfig(method="mean_shift")) -> ClusterModel:
    """Flat-kernel mean-shift; the number of clusters is an output.

    Every point climbs to the mean of the data within ``bandwidth`` of its
    current position until it moves less than ``tol``.  Converged positions
    within ``bandwidth`` of each other are linked, each linked group becomes
    one mode (the mean of its positions), and modes are numbered in
    lexicographic order of their coordinates.  Points are finally assigned
    to their nearest mode.  ``bandwidth=0`` selects :func:`auto_bandwidth`.
    """
    X = _as_points(points)
    bw = config.bandwidth or auto_bandwidth(X, config.seed)
    tree = cKDTree(X)
    P = X.copy()
    active = np.ones(len(X), dtype=bool)
    it = 0
    while active.any() and it < config.max_iter:
        it += 1
        idx = np.flatnonzero(active)
        for i, nbrs in zip(idx, tree.query_ball_point(P[idx], bw)):
            new = X[np.sort(nbrs)].mean(axis=0)
            if np.abs(new - P[i]).max() < config.tol:
                active[i] = False
            P[i] = new

    uniq, inverse = np.unique(np.round(P, 8), axis=0, return_inverse=True)
    inverse = inverse.ravel()
    pairs = cKDTree(uniq).query_pairs(bw, output_type="ndarray")
    m = len(uniq)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m)) if len(pairs) else coo_matrix((m, m))
    n_modes, comp = connected_components(graph, directed=False)
    point_comp = comp[inverse]
    modes = np.array([P[point_comp == c].mean(axis=0) for c in range(n_modes)])
    modes = modes[np.lexsort(modes.T[::-1])]
    assign = np.argmin(_sq_dists(X, modes), axis=1)
    return ClusterModel("mean_shift", modes, assign, sse(X, modes, assign), it, bandwidth=bw)


def fit_clusters(points, config: ClusterConfig) -> ClusterModel:
    """Dispatch on ``config.method``."""
    X = _as_points(points)
    return {
        "kmeans_modified": kmeans_modified,
        "som": som_cluster,
        "gmm": gmm_em,
        "mean_shift": mean_shift,
    }[config.method](X, config)
