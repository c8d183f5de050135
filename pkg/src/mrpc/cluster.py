"""K-means in Euclidean, kernel and manifold settings.

Every variant shares the same Lloyd loop and conventions:

* initial centres are ``m`` distinct data points drawn uniformly; restart
  ``r`` uses the generator seeded with ``(seed, r)``,
* assignment ties go to the lowest cluster index,
* an empty cluster receives the point farthest from its assigned centre,
* a run stops when labels repeat, the objective hits zero, or its relative
  decrease drops to ``tol``,
* the restart with the lowest objective wins (earliest on ties).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import manifold
from .errors import ConfigError, InvalidSize, TooFewPoints
from .kernel import GramMatrix, as_stack
from .manifold import Kind
from .rp import LandmarkSet, fit_kpca_rp

INTRINSIC_MAX_ITER = 100


@dataclass(frozen=True)
class KmeansConfig:
    m: int
    max_iter: int = 300
    tol: float = 1e-7
    restarts: int = 10
    seed: int = 0
    init: str = "uniform_random_points"

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.restarts < 1:
            raise ConfigError(f"restarts must be >= 1, got {self.restarts}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol < 0:
            raise ConfigError(f"tol must be >= 0, got {self.tol}")
        if self.init != "uniform_random_points":
            raise ConfigError(f"unsupported init {self.init!r}")


@dataclass
class ClusterResult:
    labels: np.ndarray
    inertia: float
    iterations: int
    converged: bool
    runtime_s: float = 0.0
    trace: list = field(default_factory=list)


def restart_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng([seed, restart])


def _repair_empty(labels: np.ndarray, own: np.ndarray, m: int) -> None:
    """Move the farthest point into each empty cluster, in place."""
    counts = np.bincount(labels, minlength=m)
    for k in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        if not movable.any():
            break
        cand = np.where(movable, own, -np.inf)
        far = int(np.argmax(cand))
        counts[labels[far]] -= 1
        counts[k] += 1
        labels[far] = k
        own[far] = 0.0


def _lloyd(n: int, cfg: KmeansConfig, init: Callable, distances: Callable,
           update: Callable, max_iter: int) -> ClusterResult:
    if n < cfg.m:
        raise TooFewPoints(f"cannot form m={cfg.m} clusters from n={n} points")
    rows = np.arange(n)
    best = None
    for r in range(cfg.restarts):
        state = init(restart_rng(cfg.seed, r).choice(n, size=cfg.m, replace=False))
        prev_labels, prev_inertia = None, np.inf
        trace = []
        converged = False
        for it in range(1, max_iter + 1):
            dist = distances(state)
            labels = np.argmin(dist, axis=1)
            own = np.maximum(dist[rows, labels], 0.0)
            _repair_empty(labels, own, cfg.m)
            inertia = float(own.sum())
            trace.append(inertia)
            if (inertia == 0.0
                    or (prev_labels is not None and np.array_equal(labels, prev_labels))
                    or (np.isfinite(prev_inertia)
                        and 0.0 <= prev_inertia - inertia <= cfg.tol * prev_inertia)):
                converged = True
                break
            prev_labels, prev_inertia = labels, inertia
            state = update(labels)
        result = ClusterResult(labels, inertia, it, converged, trace=trace)
        if best is None or result.inertia < best.inertia:
            best = result
    return best


def _one_hot_means(labels: np.ndarray, m: int) -> np.ndarray:
    """n x m matrix whose column k averages the members of cluster k."""
    H = np.zeros((len(labels), m))
    H[np.arange(len(labels)), labels] = 1.0
    counts = H.sum(axis=0)
    counts[counts == 0] = 1.0
    return H / counts


def kmeans(vectors, cfg: KmeansConfig) -> ClusterResult:
    """Lloyd's K-means on the rows of ``vectors`` (squared Euclidean objective)."""
    start = time.perf_counter()
    X = np.asarray(vectors, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    sq = np.einsum("ij,ij->i", X, X)

    def distances(C):
        return sq[:, None] - 2.0 * (X @ C.T) + np.einsum("ij,ij->i", C, C)[None, :]

    def update(labels):
        return _one_hot_means(labels, cfg.m).T @ X

    res = _lloyd(len(X), cfg, lambda idx: X[idx].copy(), distances, update, cfg.max_iter)
    res.runtime_s = time.perf_counter() - start
    return res


def kernel_kmeans(gram, cfg: KmeansConfig) -> ClusterResult:
    """K-means in the RKHS of a full n x n Gram matrix.

    Centres are kept implicitly as averaging weights over the data, so the
    squared distance of point x to centre c is
    ``K(x,x) - 2 sum_j w_j K(x,j) + sum_jl w_j w_l K(j,l)``.
    """
    start = time.perf_counter()
    K = np.asarray(gram.values if isinstance(gram, GramMatrix) else gram, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ConfigError(f"kernel_kmeans needs a square Gram matrix, got {K.shape}")
    n = len(K)
    diag = np.diag(K).copy()

    def init(idx):
        H = np.zeros((n, cfg.m))
        H[idx, np.arange(cfg.m)] = 1.0
        return H

    def distances(H):
        KH = K @ H
        return diag[:, None] - 2.0 * KH + np.einsum("ij,ij->j", H, KH)[None, :]

    res = _lloyd(n, cfg, init, distances, lambda labels: _one_hot_means(labels, cfg.m),
                 cfg.max_iter)
    res.runtime_s = time.perf_counter() - start
    return res


def loge_embed(points, kind=Kind.SPD) -> np.ndarray:
    """Flat Euclidean features at the identity tangent space.

    SPD matrices map to the upper triangle of their logarithm with
    off-diagonal entries scaled by sqrt(2), so Euclidean distances equal the
    log-Euclidean distance. Grassmann bases are flattened row-major as-is.
    """
    stack = as_stack(points)
    n = len(stack)
    if manifold.as_kind(kind) is Kind.GRASSMANN:
        return stack.reshape(n, -1).copy()
    d = stack.shape[1]
    logs = manifold.spd_logm_batch(stack)
    iu, ju = np.triu_indices(d)
    weights = np.where(iu == ju, 1.0, np.sqrt(2.0))
    return logs[:, iu, ju] * weights


def _geodesic_distances(kind: Kind, centres: Sequence[np.ndarray], stack: np.ndarray) -> np.ndarray:
    dist_to = manifold.spd_distances_to if kind is Kind.SPD else manifold.grassmann_distances_to
    return np.stack([dist_to(c, stack) for c in centres], axis=1)


def intrinsic_kmeans(points, kind, cfg: KmeansConfig,
                     karcher_max_iter: int = 50) -> ClusterResult:
    """K-means on the manifold with geodesic distances and Karcher-mean centres.

    The outer loop never runs more than 100 sweeps, whatever ``cfg.max_iter``
    says; a run cut short by that cap reports ``converged=False``.
    """
    start = time.perf_counter()
    kind = manifold.as_kind(kind)
    stack = as_stack(points)

    def update(labels):
        centres = []
        for k in range(cfg.m):
            members = stack[labels == k]
            centres.append(manifold.karcher_mean(members, kind, max_iter=karcher_max_iter).point)
        return centres

    res = _lloyd(len(stack), cfg, lambda idx: [stack[i] for i in idx],
                 lambda centres: _geodesic_distances(kind, centres, stack), update,
                 min(cfg.max_iter, INTRINSIC_MAX_ITER))
    res.runtime_s = time.perf_counter() - start
    return res


def kpca_kmeans(gram, keep: int | None, cfg: KmeansConfig) -> ClusterResult:
    """K-means on the leading kernel principal components of the whole dataset."""
    start = time.perf_counter()
    if not isinstance(gram, GramMatrix):
        raise ConfigError("kpca_kmeans needs a GramMatrix")
    n = gram.n_rows
    if keep is not None and not 1 <= keep <= n - 1:
        raise InvalidSize(f"keep must lie in [1, n-1={n - 1}], got {keep}")
    proj = fit_kpca_rp(LandmarkSet(np.arange(n), gram), keep=keep)
    res = kmeans(proj.embed(gram), cfg)
    res.runtime_s = time.perf_counter() - start
    return res
