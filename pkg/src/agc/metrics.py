"""Evaluation: label alignment scores and label-free structural quality.

Supervised scores are computed from one contingency table. All sums are
accumulated in float64.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import EmptyGraph, ShapeMismatch
from .graph import CsrGraph


@dataclass(frozen=True)
class ContingencyTable:
    """``counts[i, j]`` = nodes with true class ``i`` and predicted cluster ``j``."""

    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def rows(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def cols(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def contingency(truth, pred) -> ContingencyTable:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise ShapeMismatch(f"{truth.shape[0]} true labels against {pred.shape[0]} predictions")
    if truth.size == 0:
        raise ShapeMismatch("cannot evaluate an empty labeling")
    if truth.min() < 0 or pred.min() < 0:
        raise ShapeMismatch("labels must be non-negative")
    k_true, k_pred = int(truth.max()) + 1, int(pred.max()) + 1
    counts = np.bincount(truth * k_pred + pred, minlength=k_true * k_pred)
    return ContingencyTable(counts.reshape(k_true, k_pred))


def accuracy_hungarian(table: ContingencyTable):
    """Best one-to-one matching of predicted clusters onto classes.

    Returns ``(acc, matching)`` with ``matching[j]`` the class assigned to
    predicted cluster ``j`` (-1 when left unmatched).
    """
    counts = table.counts
    size = max(counts.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: counts.shape[0], : counts.shape[1]] = counts
    rows, cols = linear_sum_assignment(padded, maximize=True)
    matching = np.full(counts.shape[1], -1, dtype=np.int64)
    for r, c in zip(rows, cols):
        if r < counts.shape[0] and c < counts.shape[1]:
            matching[c] = r
    matched = int(padded[rows, cols].sum())
    return matched / table.n, matching


def _entropy(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def mutual_information(table: ContingencyTable) -> float:
    c = table.counts.astype(np.float64)
    n = c.sum()
    outer = np.outer(c.sum(axis=1), c.sum(axis=0))
    nz = c > 0
    return float((c[nz] / n * np.log(c[nz] * n / outer[nz])).sum())


def nmi(table: ContingencyTable) -> float:
    """Mutual information over the arithmetic mean of the two entropies."""
    h_true, h_pred = _entropy(table.rows), _entropy(table.cols)
    denom = 0.5 * (h_true + h_pred)
    if denom <= 0.0:
        return 0.0
    return min(1.0, max(0.0, mutual_information(table) / denom))


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def ari(table: ContingencyTable) -> float:
    index = _comb2(table.counts).sum()
    sum_a = _comb2(table.rows).sum()
    sum_b = _comb2(table.cols).sum()
    expected = sum_a * sum_b / _comb2(table.n)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 0.0
    return float((index - expected) / (max_index - expected))


def f1_macro(table: ContingencyTable, matching) -> float:
    counts = table.counts
    rows, cols = table.rows, table.cols
    scores = np.zeros(counts.shape[0])
    for j, t in enumerate(matching):
        if t < 0:
            continue
        hit = counts[t, j]
        if hit == 0:
            continue
        precision = hit / cols[j]
        recall = hit / rows[t]
        scores[t] = 2.0 * precision * recall / (precision + recall)
    return float(scores.mean())


def homogeneity_completeness(table: ContingencyTable):
    h_true, h_pred = _entropy(table.rows), _entropy(table.cols)
    mi = mutual_information(table)
    # H(T|P) = H(T) - MI
    homogeneity = 1.0 if h_true == 0.0 else mi / h_true
    completeness = 1.0 if h_pred == 0.0 else mi / h_pred
    return min(1.0, max(0.0, homogeneity)), min(1.0, max(0.0, completeness))


def _cluster_volumes(graph: CsrGraph, pred):
    pred = np.asarray(pred, dtype=np.int64)
    if pred.shape[0] != graph.num_nodes:
        raise ShapeMismatch(f"{pred.shape[0]} predictions for {graph.num_nodes} nodes")
    k = int(pred.max()) + 1 if pred.size else 0
    rows = graph.row_ids()
    same = pred[rows] == pred[graph.col_idx]
    # ordered pairs: internal edges counted twice, boundary edges once per side
    internal2 = np.bincount(pred[rows[same]], minlength=k).astype(np.float64)
    boundary = np.bincount(pred[rows[~same]], minlength=k).astype(np.float64)
    members = np.bincount(pred, minlength=k)
    return internal2, boundary, members


def modularity(graph: CsrGraph, pred) -> float:
    """Newman modularity, summed per cluster as ``e_k/2m - (vol_k/2m)^2``."""
    two_m = 2.0 * graph.num_edges
    if two_m == 0:
        raise EmptyGraph("modularity undefined on a graph without edges")
    internal2, boundary, _ = _cluster_volumes(graph, pred)
    vol = internal2 + boundary
    return float(np.sum(internal2 / two_m - (vol / two_m) ** 2))


def conductance(graph: CsrGraph, pred) -> float:
    """Mean over non-empty clusters of ``cut / (2 * internal + cut)``; zero-volume clusters give 0."""
    internal2, boundary, members = _cluster_volumes(graph, pred)
    vol = internal2 + boundary
    per = np.divide(boundary, vol, out=np.zeros_like(vol), where=vol > 0)
    nonempty = members > 0
    return float(per[nonempty].mean()) if nonempty.any() else 0.0


@dataclass
class MetricsReport:
    modularity: float
    conductance: float
    k_pred: int
    acc: Optional[float] = None
    f1: Optional[float] = None
    nmi: Optional[float] = None
    ari: Optional[float] = None
    homogeneity: Optional[float] = None
    completeness: Optional[float] = None
    k_true: Optional[int] = None
    seconds: Optional[float] = None
    peak_mem_bytes: Optional[int] = None

    KEY_ORDER = (
        "acc", "nmi", "ari", "f1", "homogeneity", "completeness",
        "modularity", "conductance", "k_pred", "k_true", "seconds", "peak_mem_bytes",
    )

    @property
    def supervised(self) -> bool:
        return self.acc is not None

    def to_dict(self, profile: bool = True) -> dict:
        raw = asdict(self)
        keys = self.KEY_ORDER if profile else self.KEY_ORDER[:-2]
        return {k: raw[k] for k in keys}

    def to_json(self, profile: bool = True) -> str:
        return json.dumps(self.to_dict(profile), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


def evaluate(graph: CsrGraph, pred, truth=None) -> MetricsReport:
    """Structural metrics always; supervised ones when ``truth`` is given.

    Nodes whose true label is negative (unlabeled) are left out of the
    supervised scores.
    """
    pred = np.asarray(pred, dtype=np.int64)
    report = MetricsReport(
        modularity=modularity(graph, pred),
        conductance=conductance(graph, pred),
        k_pred=int(np.unique(pred).shape[0]),
    )
    if truth is not None:
        truth = np.asarray(truth, dtype=np.int64)
        if truth.shape != pred.shape:
            raise ShapeMismatch(f"{truth.shape[0]} true labels against {pred.shape[0]} predictions")
        labeled = truth >= 0
        table = contingency(truth[labeled], pred[labeled])
        acc, matching = accuracy_hungarian(table)
        report.acc = acc
        report.f1 = f1_macro(table, matching)
        report.nmi = nmi(table)
        report.ari = ari(table)
        report.homogeneity, report.completeness = homogeneity_completeness(table)
        report.k_true = int(np.unique(truth[labeled]).shape[0])
    return report


def aggregate(reports) -> dict:
    """Per-metric mean and population SD over runs (``None`` fields skipped)."""
    out = {}
    for key in MetricsReport.KEY_ORDER:
        values = [getattr(r, key) for r in reports if getattr(r, key) is not None]
        if not values:
            continue
        arr = np.asarray(values, dtype=np.float64)
        out[key] = {"mean": float(arr.mean()), "std": float(arr.std())}
    return out
