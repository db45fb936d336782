"""Graph storage, dataset files, synthetic block models and homophily."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    InvalidConfig,
    InvalidEdge,
    MissingComponent,
    ParseError,
    ShapeMismatch,
)

FEATURE_MAGIC = b"AGCF"
EMBEDDING_MAGIC = b"AGCZ"

# pair counts up to this are sampled with one Bernoulli draw per pair
_DENSE_PAIR_LIMIT = 1 << 22


@dataclass(frozen=True, eq=False)
class CsrGraph:
    """Simple undirected graph in compressed sparse row form.

    Rows hold sorted, deduplicated neighbor lists; the structure is symmetric
    and has no self-loops. Instances are immutable and safe to share.
    """

    num_nodes: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        row_ptr = np.ascontiguousarray(self.row_ptr, dtype=np.int64)
        col_idx = np.ascontiguousarray(self.col_idx, dtype=np.int64)
        row_ptr.setflags(write=False)
        col_idx.setflags(write=False)
        degrees = np.diff(row_ptr)
        degrees.setflags(write=False)
        object.__setattr__(self, "row_ptr", row_ptr)
        object.__setattr__(self, "col_idx", col_idx)
        object.__setattr__(self, "degrees", degrees)

    @property
    def num_edges(self) -> int:
        return int(self.col_idx.shape[0] // 2)

    def neighbors(self, node: int) -> np.ndarray:
        return self.col_idx[self.row_ptr[node] : self.row_ptr[node + 1]]

    def row_ids(self) -> np.ndarray:
        """Owning row of every entry of ``col_idx``."""
        return np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees)

    def edges(self) -> np.ndarray:
        """Undirected edge list as an (|E|, 2) array with u < v, sorted."""
        rows = self.row_ids()
        keep = rows < self.col_idx
        return np.stack([rows[keep], self.col_idx[keep]], axis=1)

    def adjacency(self, dtype=np.float64) -> sp.csr_matrix:
        """Unit-weight scipy CSR view; cached per dtype, do not mutate."""
        cache = self.__dict__.setdefault("_adjacency", {})
        key = np.dtype(dtype).str
        if key not in cache:
            data = np.ones(self.col_idx.shape[0], dtype=dtype)
            cache[key] = sp.csr_matrix(
                (data, self.col_idx, self.row_ptr), shape=(self.num_nodes, self.num_nodes)
            )
        return cache[key]

    def equals(self, other: "CsrGraph") -> bool:
        return (
            self.num_nodes == other.num_nodes
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
        )

    def __repr__(self):
        return f"CsrGraph(num_nodes={self.num_nodes}, num_edges={self.num_edges})"


def build_graph(edges, num_nodes: int) -> CsrGraph:
    """Build a CsrGraph from an edge list.

    Edges are symmetrized, duplicates merged and self-loops dropped, so the
    result does not depend on the order or orientation of ``edges``.

    Raises
    ------
    InvalidEdge
        If any endpoint is negative or not below ``num_nodes``.
    """
    num_nodes = int(num_nodes)
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidEdge(f"edge list must be pairs, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() >= num_nodes):
        bad = np.flatnonzero((arr < 0).any(axis=1) | (arr >= num_nodes).any(axis=1))[0]
        raise InvalidEdge(
            f"edge {tuple(int(x) for x in arr[bad])} out of range for {num_nodes} nodes"
        )
    u = np.minimum(arr[:, 0], arr[:, 1])
    v = np.maximum(arr[:, 0], arr[:, 1])
    keep = u != v
    key = np.unique(u[keep] * num_nodes + v[keep])
    u, v = np.divmod(key, num_nodes)
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    row_ptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=num_nodes), out=row_ptr[1:])
    return CsrGraph(num_nodes, row_ptr, dst)


def induced_subgraph(graph: CsrGraph, nodes: np.ndarray) -> CsrGraph:
    """Subgraph induced on ``nodes``; local id ``i`` is global ``nodes[i]``."""
    nodes = np.asarray(nodes, dtype=np.int64)
    local = np.full(graph.num_nodes, -1, dtype=np.int64)
    local[nodes] = np.arange(nodes.shape[0], dtype=np.int64)
    starts = graph.row_ptr[nodes]
    counts = graph.degrees[nodes]
    owner = np.repeat(np.arange(nodes.shape[0], dtype=np.int64), counts)
    # gather the neighbor lists of the sampled rows
    offsets = np.repeat(starts - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
    nbrs = graph.col_idx[np.arange(owner.shape[0], dtype=np.int64) + offsets]
    mapped = local[nbrs]
    keep = mapped >= 0
    return build_graph(np.stack([owner[keep], mapped[keep]], axis=1), nodes.shape[0])


# ---------------------------------------------------------------------------
# dataset files


class Dataset(NamedTuple):
    graph: CsrGraph
    features: np.ndarray
    labels: Optional[np.ndarray]


def _read_meta(path: Path) -> dict:
    meta = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(path, lineno, "expected key=value")
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()
    for key in ("num_nodes", "num_edges", "directed"):
        if key not in meta:
            raise MissingComponent(f"{path}: missing key {key!r}")
    try:
        meta["num_nodes"] = int(meta["num_nodes"])
        meta["num_edges"] = int(meta["num_edges"])
    except ValueError as exc:
        raise ParseError(path, 0, str(exc)) from None
    meta["directed"] = meta["directed"].lower() == "true"
    return meta


def _read_int_table(path: Path, width: int) -> np.ndarray:
    """Parse whitespace-separated integers with ``width`` per line."""
    text = path.read_text()
    lines = text.splitlines()
    widths = [len(ln.split()) for ln in lines]
    if all(w in (0, width) for w in widths):
        try:
            flat = np.array(text.split(), dtype=np.int64)
            return flat.reshape(-1, width)
        except ValueError:
            pass
    # slow path, only to locate the offending line
    rows = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != width:
            raise ParseError(path, lineno, f"expected {width} fields, got {len(parts)}")
        try:
            rows.append([int(p) for p in parts])
        except ValueError:
            raise ParseError(path, lineno, f"not an integer: {line.strip()!r}") from None
    return np.array(rows, dtype=np.int64).reshape(-1, width)


def write_matrix_bin(path, data: np.ndarray, magic: bytes = FEATURE_MAGIC) -> None:
    data = np.ascontiguousarray(data, dtype="<f4")
    n, d = data.shape
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<QQ", n, d))
        fh.write(data.tobytes())


def read_matrix_bin(path, magic: bytes = FEATURE_MAGIC) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != magic:
        raise ParseError(path, 0, f"bad magic {raw[:4]!r}, expected {magic!r}")
    if len(raw) < 20:
        raise ParseError(path, 0, "truncated header")
    n, d = struct.unpack("<QQ", raw[4:20])
    if len(raw) != 20 + 4 * n * d:
        raise ParseError(path, 0, f"payload holds {len(raw) - 20} bytes, header says {n}x{d}")
    return np.frombuffer(raw, dtype="<f4", offset=20).astype(np.float32).reshape(n, d)


def _read_features_csv(path: Path) -> np.ndarray:
    rows = []
    width = None
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = [float(x) for x in line.split(",")]
        except ValueError:
            raise ParseError(path, lineno, "non-numeric feature value") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(path, lineno, f"expected {width} columns, got {len(row)}")
        rows.append(row)
    return np.array(rows, dtype=np.float32).reshape(len(rows), width or 0)


def save_dataset(path, graph: CsrGraph, features: np.ndarray, labels=None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / "graph.meta").write_text(
        f"num_nodes={graph.num_nodes}\nnum_edges={graph.num_edges}\ndirected=false\n"
    )
    np.savetxt(path / "edges.tsv", graph.edges(), fmt="%d", delimiter="\t")
    write_matrix_bin(path / "features.bin", features)
    if labels is not None:
        np.savetxt(path / "labels.tsv", np.asarray(labels, dtype=np.int64), fmt="%d")
    return path


def load_dataset(path) -> Dataset:
    """Load a dataset directory.

    The directory holds ``graph.meta``, ``edges.tsv``, ``features.bin`` (or
    ``features.csv``) and optionally ``labels.tsv``. Label ``-1`` marks an
    unlabeled node.
    """
    path = Path(path)
    meta_path = path / "graph.meta"
    edges_path = path / "edges.tsv"
    for required in (meta_path, edges_path):
        if not required.is_file():
            raise MissingComponent(f"missing {required}")
    meta = _read_meta(meta_path)
    n = meta["num_nodes"]
    edges = _read_int_table(edges_path, 2)
    graph = build_graph(edges, n)
    if not meta["directed"] and graph.num_edges != meta["num_edges"]:
        raise ShapeMismatch(
            f"graph.meta declares {meta['num_edges']} edges, edges.tsv holds {graph.num_edges}"
        )

    if (path / "features.bin").is_file():
        features = read_matrix_bin(path / "features.bin")
    elif (path / "features.csv").is_file():
        features = _read_features_csv(path / "features.csv")
    else:
        raise MissingComponent(f"missing features.bin or features.csv in {path}")
    if features.shape[0] != n:
        raise ShapeMismatch(f"features have {features.shape[0]} rows for {n} nodes")

    labels = None
    if (path / "labels.tsv").is_file():
        labels = _read_int_table(path / "labels.tsv", 1)[:, 0]
        if labels.shape[0] != n:
            raise ShapeMismatch(f"labels have {labels.shape[0]} entries for {n} nodes")
    return Dataset(graph, features, labels)


# ---------------------------------------------------------------------------
# stochastic block model


@dataclass(frozen=True)
class SbmSpec:
    block_sizes: Sequence[int]
    p_in: float
    p_out: float
    seed: int = 0
    feature_dim: int = 16
    feature_signal: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(b) for b in self.block_sizes))
        if not self.block_sizes or min(self.block_sizes) < 1:
            raise InvalidConfig("block sizes must all be >= 1")
        if not 0.0 <= self.p_out <= self.p_in <= 1.0:
            raise InvalidConfig(f"need 0 <= p_out <= p_in <= 1, got {self.p_out}, {self.p_in}")
        if self.feature_dim < 1:
            raise InvalidConfig("feature_dim must be >= 1")

    @property
    def num_nodes(self) -> int:
        return sum(self.block_sizes)


def _sample_pair_indices(rng, n_pairs: int, p: float) -> np.ndarray:
    """Sorted indices in [0, n_pairs) each kept independently with probability p."""
    if p <= 0.0 or n_pairs == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n_pairs, dtype=np.int64)
    if n_pairs <= _DENSE_PAIR_LIMIT:
        return np.flatnonzero(rng.random(n_pairs) < p).astype(np.int64)
    # geometric skips: gap to the next kept pair is Geometric(p)
    chunks = []
    pos = -1
    expected = n_pairs * p
    chunk = int(expected + 6 * math.sqrt(expected) + 64)
    while True:
        idx = pos + np.cumsum(rng.geometric(p, size=chunk))
        if idx[-1] >= n_pairs:
            chunks.append(idx[idx < n_pairs])
            break
        chunks.append(idx)
        pos = int(idx[-1])
        chunk = max(64, chunk // 4)
    return np.concatenate(chunks).astype(np.int64)


def _triu_pairs(n: int, idx: np.ndarray):
    """Map row-major strict-upper-triangle indices to (i, j) with i < j."""
    b = 2.0 * n - 1.0
    i = np.floor((b - np.sqrt(b * b - 8.0 * idx)) / 2.0).astype(np.int64)
    start = i * (2 * n - i - 1) // 2
    # repair float rounding at row boundaries
    over = start > idx
    i[over] -= 1
    start = i * (2 * n - i - 1) // 2
    nxt = (i + 1) * (2 * n - i - 2) // 2
    under = idx >= nxt
    i[under] += 1
    start = i * (2 * n - i - 1) // 2
    j = idx - start + i + 1
    return i, j


def generate_sbm(spec: SbmSpec):
    """Sample a planted-partition graph.

    Returns ``(graph, labels)``; labels are block ids. One PRNG stream seeded
    by ``spec.seed`` is consumed block pair by block pair, so output is fixed
    per seed.
    """
    rng = np.random.default_rng(spec.seed)
    sizes = np.array(spec.block_sizes, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    us, vs = [], []
    for a in range(len(sizes)):
        na = int(sizes[a])
        idx = _sample_pair_indices(rng, na * (na - 1) // 2, spec.p_in)
        i, j = _triu_pairs(na, idx)
        us.append(i + offsets[a])
        vs.append(j + offsets[a])
        for b in range(a + 1, len(sizes)):
            nb = int(sizes[b])
            idx = _sample_pair_indices(rng, na * nb, spec.p_out)
            i, j = np.divmod(idx, nb)
            us.append(i + offsets[a])
            vs.append(j + offsets[b])
    edges = np.stack([np.concatenate(us), np.concatenate(vs)], axis=1)
    labels = np.repeat(np.arange(len(sizes), dtype=np.int64), sizes)
    return build_graph(edges, spec.num_nodes), labels


def sbm_features(spec: SbmSpec, labels: np.ndarray) -> np.ndarray:
    """Gaussian node attributes with a per-block mean of scale ``feature_signal``.

    Uses a stream derived from ``spec.seed`` but independent of the edge stream.
    """
    rng = np.random.default_rng([spec.seed, 1])
    k = int(labels.max()) + 1
    means = rng.normal(0.0, spec.feature_signal, size=(k, spec.feature_dim))
    noise = rng.standard_normal((labels.shape[0], spec.feature_dim))
    return (means[labels] + noise).astype(np.float32)


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class GraphStats:
    edge_homophily: float
    node_homophily: float
    avg_degree: float


def homophily(graph: CsrGraph, labels) -> GraphStats:
    """Edge and node homophily.

    Only nodes with a label (``>= 0``) take part: unlabeled nodes and every
    edge touching one are ignored. A labeled node with no labeled neighbor
    contributes 0 to the node-level mean.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != graph.num_nodes:
        raise ShapeMismatch(f"{labels.shape[0]} labels for {graph.num_nodes} nodes")
    avg_degree = 2.0 * graph.num_edges / graph.num_nodes if graph.num_nodes else 0.0
    rows = graph.row_ids()
    cols = graph.col_idx
    valid = (labels[rows] >= 0) & (labels[cols] >= 0)
    same = valid & (labels[rows] == labels[cols])
    # each undirected edge appears twice, which leaves the ratio unchanged
    n_valid = int(valid.sum())
    h_edge = float(same.sum()) / n_valid if n_valid else 0.0

    same_count = np.bincount(rows[same], minlength=graph.num_nodes).astype(np.float64)
    valid_count = np.bincount(rows[valid], minlength=graph.num_nodes).astype(np.float64)
    labeled = labels >= 0
    frac = np.divide(same_count, valid_count, out=np.zeros_like(same_count), where=valid_count > 0)
    h_node = float(frac[labeled].mean()) if labeled.any() else 0.0
    return GraphStats(h_edge, h_node, avg_degree)
