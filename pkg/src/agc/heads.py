"""Cluster heads: discrete KMeans and differentiable soft assignments."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np
import scipy.sparse as sp

from ._threads import num_threads
from .errors import EmptyClusterTarget, InvalidConfig, ShapeMismatch, TooFewPoints
from .mlp import MlpParams, mlp_forward, softmax

_CHUNK_ROWS = 8192


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    max_iters: int = 300
    tol: float = 1e-4
    seed: int = 0
    init: str = "kmeanspp"
    batch_size: Optional[int] = None

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfig("k must be >= 1")
        if self.tol < 0:
            raise InvalidConfig("tol must be >= 0")
        if self.init not in ("kmeanspp", "random"):
            raise InvalidConfig(f"unknown init {self.init!r}")
        if self.batch_size is not None and self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")


class KMeansResult(NamedTuple):
    centers: np.ndarray
    labels: np.ndarray
    inertia: float
    n_iter: int
    history: List[float]


def _nearest_block(z, centers):
    diff = z[:, None, :] - centers[None, :, :]
    d2 = np.einsum("nkd,nkd->nk", diff, diff)
    labels = np.argmin(d2, axis=1)  # first minimum wins ties
    return labels, d2[np.arange(z.shape[0]), labels]


def _nearest(z, centers):
    """Nearest center per row by exact squared distance, lowest index on ties."""
    n = z.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    starts = range(0, n, _CHUNK_ROWS)

    def work(lo):
        hi = min(lo + _CHUNK_ROWS, n)
        labels[lo:hi], dist[lo:hi] = _nearest_block(z[lo:hi], centers)

    threads = num_threads()
    if threads == 1 or n <= _CHUNK_ROWS:
        for lo in starts:
            work(lo)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    return labels, dist


def _as_points(z):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ShapeMismatch(f"expected a 2-d embedding, got shape {z.shape}")
    return z


def _init_centers(z, k, rng, method):
    n = z.shape[0]
    if method == "random":
        return z[np.sort(rng.choice(n, size=k, replace=False))].copy()
    # greedy kmeans++: draw a few D^2-weighted candidates per step, keep the
    # one that lowers the potential most (first wins on ties)
    trials = 2 + int(np.log(k))
    centers = np.empty((k, z.shape[1]))
    centers[0] = z[rng.integers(n)]
    closest = ((z - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # every point already coincides with a center
            centers[c] = z[int(rng.integers(n))]
            continue
        picks = np.searchsorted(np.cumsum(closest), rng.random(trials) * total, side="right")
        picks = np.minimum(picks, n - 1)
        best, best_pot = None, np.inf
        for idx in picks:
            cand = np.minimum(closest, ((z - z[idx]) ** 2).sum(axis=1))
            pot = cand.sum()
            if pot < best_pot:
                best, best_pot, best_closest = idx, pot, cand
        centers[c] = z[best]
        closest = best_closest
    return centers


def _cluster_sums(z, labels, k):
    n = z.shape[0]
    ind = sp.csr_matrix((np.ones(n), (labels, np.arange(n))), shape=(k, n))
    return ind @ z, np.bincount(labels, minlength=k)


def _lloyd_update(z, labels, dist, k):
    sums, counts = _cluster_sums(z, labels, k)
    centers = sums / np.maximum(counts, 1)[:, None]
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        # reseed empties onto the points worst served by their current center
        far = np.argsort(-dist, kind="stable")[: empty.size]
        centers[empty] = z[far]
    return centers


def kmeans_fit(z, cfg: KMeansConfig) -> KMeansResult:
    """Lloyd's algorithm (or mini-batch KMeans when ``cfg.batch_size`` is set).

    Stops once the relative inertia improvement drops to ``cfg.tol`` or
    after ``cfg.max_iters`` updates. Deterministic for a fixed seed.
    """
    z = _as_points(z)
    n = z.shape[0]
    if n < cfg.k:
        raise TooFewPoints(f"{n} points for k={cfg.k}")
    rng = np.random.default_rng(cfg.seed)
    centers = _init_centers(z, cfg.k, rng, cfg.init)
    if cfg.batch_size is not None:
        return _minibatch(z, centers, cfg, rng)

    labels, dist = _nearest(z, centers)
    inertia = float(dist.sum())
    history = [inertia]
    n_iter = 0
    for n_iter in range(1, cfg.max_iters + 1):
        centers = _lloyd_update(z, labels, dist, cfg.k)
        labels, dist = _nearest(z, centers)
        new = float(dist.sum())
        history.append(new)
        converged = inertia - new <= cfg.tol * inertia
        inertia = new
        if converged:
            break
    return KMeansResult(centers, labels, inertia, n_iter, history)


def _minibatch(z, centers, cfg, rng):
    """Sculley-style updates: each center moves by 1/count toward its batch points."""
    n = z.shape[0]
    batch = min(cfg.batch_size, n)
    counts = np.zeros(cfg.k)
    ewa = None
    best = np.inf
    stale = 0
    history = []
    n_iter = 0
    for n_iter in range(1, cfg.max_iters + 1):
        idx = rng.choice(n, size=batch, replace=False) if batch < n else np.arange(n)
        pts = z[idx]
        labels, dist = _nearest(pts, centers)
        batch_inertia = float(dist.sum()) / batch
        sums, hits = _cluster_sums(pts, labels, cfg.k)
        moved = hits > 0
        counts[moved] += hits[moved]
        # running mean over every point each center has absorbed
        centers[moved] += (sums[moved] - hits[moved, None] * centers[moved]) / counts[moved, None]
        ewa = batch_inertia if ewa is None else 0.9 * ewa + 0.1 * batch_inertia
        history.append(ewa)
        if ewa < best * (1.0 - cfg.tol):
            best, stale = ewa, 0
        else:
            stale += 1
            if stale >= 10:
                break
    labels, dist = _nearest(z, centers)
    return KMeansResult(centers, labels, float(dist.sum()), n_iter, history)


def kmeans_assign(z, centers) -> np.ndarray:
    z = _as_points(z)
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[1] != z.shape[1]:
        raise ShapeMismatch(f"centers of shape {centers.shape} for {z.shape[1]}-d points")
    return _nearest(z, centers)[0]


def squared_distances(z, centers) -> np.ndarray:
    diff = z[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def student_t_assign(z, centers, nu: float = 1.0) -> np.ndarray:
    """Soft assignment under a Student-t kernel with ``nu`` degrees of freedom."""
    z = _as_points(z)
    centers = np.asarray(centers, dtype=np.float64)
    if centers.shape[1] != z.shape[1]:
        raise ShapeMismatch(f"centers of shape {centers.shape} for {z.shape[1]}-d points")
    if nu <= 0:
        raise InvalidConfig("nu must be > 0")
    log_w = -0.5 * (nu + 1.0) * np.log1p(squared_distances(z, centers) / nu)
    return softmax(log_w)


def dec_target(q) -> np.ndarray:
    """Sharpened target: square, divide by soft cluster frequency, renormalize."""
    q = np.asarray(q, dtype=np.float64)
    freq = q.sum(axis=0)
    if np.any(freq <= 0.0):
        raise EmptyClusterTarget(f"clusters {np.flatnonzero(freq <= 0).tolist()} have zero mass")
    w = q * q / freq
    return w / w.sum(axis=1, keepdims=True)


def softmax_head_forward(z, params: MlpParams) -> np.ndarray:
    logits, _ = mlp_forward(z, params)
    return softmax(logits)
