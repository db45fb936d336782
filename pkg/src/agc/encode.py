"""Non-parametric encoders: fixed graph filters over node attributes.

All filters use the symmetric normalization ``D^-1/2 A D^-1/2`` of the
adjacency (optionally with self-loops added first). Products are evaluated
sparsely and accumulated in float64; outputs are float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._threads import spmm
from .errors import InvalidConfig, ShapeMismatch
from .graph import CsrGraph

VARIANTS = ("sgc_power", "ssgc_average")


@dataclass(frozen=True)
class SmoothingConfig:
    num_hops: int = 16
    alpha: float = 0.05
    add_self_loops: bool = True
    variant: str = "ssgc_average"

    def __post_init__(self):
        if self.num_hops < 0:
            raise InvalidConfig("num_hops must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidConfig("alpha must lie in [0, 1]")
        if self.variant not in VARIANTS:
            raise InvalidConfig(f"variant must be one of {VARIANTS}, got {self.variant!r}")


def normalized_adjacency(graph: CsrGraph, add_self_loops: bool = True) -> sp.csr_matrix:
    """``D^-1/2 A D^-1/2`` as float64 CSR; zero-degree rows stay zero."""
    adj = graph.adjacency(np.float64)
    deg = graph.degrees.astype(np.float64)
    if add_self_loops:
        adj = (adj + sp.identity(graph.num_nodes, dtype=np.float64, format="csr")).tocsr()
        deg = deg + 1.0
    inv_sqrt = np.zeros_like(deg)
    np.divide(1.0, np.sqrt(deg), out=inv_sqrt, where=deg > 0)
    adj.sort_indices()
    rows = np.repeat(np.arange(graph.num_nodes), np.diff(adj.indptr))
    adj.data *= inv_sqrt[rows] * inv_sqrt[adj.indices]
    return adj


def _check_rows(graph, x):
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != graph.num_nodes:
        raise ShapeMismatch(f"features of shape {x.shape} for {graph.num_nodes} nodes")
    return x


def normalized_propagate(graph: CsrGraph, x, hops: int, add_self_loops: bool = True) -> np.ndarray:
    """Apply the normalized adjacency ``hops`` times to ``x``."""
    x = _check_rows(graph, x)
    if hops < 0:
        raise InvalidConfig("hops must be >= 0")
    if hops == 0:
        return np.array(x, dtype=np.float32)
    s = normalized_adjacency(graph, add_self_loops)
    cur = np.asarray(x, dtype=np.float64)
    nxt = np.empty_like(cur)
    for _ in range(hops):
        spmm(s, cur, out=nxt)
        cur, nxt = nxt, cur
    return cur.astype(np.float32)


def ssgc_smooth(graph: CsrGraph, x, cfg: SmoothingConfig = SmoothingConfig()) -> np.ndarray:
    """Markov-diffusion smoothing: ``alpha*X + (1-alpha) * mean_k S^k X``, k = 1..K."""
    x = _check_rows(graph, x)
    if cfg.num_hops < 1:
        raise InvalidConfig("ssgc smoothing needs num_hops >= 1")
    s = normalized_adjacency(graph, cfg.add_self_loops)
    x64 = np.asarray(x, dtype=np.float64)
    cur = x64.copy()
    nxt = np.empty_like(cur)
    acc = np.zeros_like(cur)
    for _ in range(cfg.num_hops):
        spmm(s, cur, out=nxt)
        cur, nxt = nxt, cur
        acc += cur
    out = cfg.alpha * x64 + ((1.0 - cfg.alpha) / cfg.num_hops) * acc
    return out.astype(np.float32)


def smooth(graph: CsrGraph, x, cfg: SmoothingConfig) -> np.ndarray:
    if cfg.variant == "sgc_power":
        return normalized_propagate(graph, x, cfg.num_hops, cfg.add_self_loops)
    return ssgc_smooth(graph, x, cfg)


def standardize_features(x) -> np.ndarray:
    """Column-wise z-scores with population std; constant columns map to 0."""
    x64 = np.asarray(x, dtype=np.float64)
    mean = x64.mean(axis=0)
    std = x64.std(axis=0)
    centered = x64 - mean
    out = np.zeros_like(centered)
    np.divide(centered, std, out=out, where=std > 1e-12 * np.maximum(1.0, np.abs(mean)))
    return out.astype(np.float32)
