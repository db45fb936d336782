"""Clustering objectives on soft assignments, each with its gradient in C.

Graph terms are evaluated through the sparse adjacency; the modularity
matrix ``A - d d^T / 2m`` is never formed.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateDenominator, EmptyGraph, InfiniteDivergence, ShapeMismatch
from .graph import CsrGraph


def _check(c, graph):
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != graph.num_nodes:
        raise ShapeMismatch(f"assignment of shape {c.shape} for {graph.num_nodes} nodes")
    return c


def _dmon_parts(c, graph):
    c = _check(c, graph)
    two_m = 2.0 * graph.num_edges
    if two_m == 0:
        raise EmptyGraph("modularity undefined on a graph without edges")
    ac = graph.adjacency() @ c
    deg = graph.degrees.astype(np.float64)
    ctd = c.T @ deg
    s = c.sum(axis=0)
    return c, two_m, ac, deg, ctd, s


def dmon_loss(c, graph: CsrGraph):
    """DMoN objective: negative soft modularity plus the collapse regularizer.

    Returns ``(loss, collapse)``; ``loss`` already includes ``collapse``.
    """
    c, two_m, ac, deg, ctd, s = _dmon_parts(c, graph)
    n, k = c.shape
    modularity_term = -(np.einsum("ik,ik->", c, ac) - ctd @ ctd / two_m) / two_m
    collapse = math.sqrt(k) / n * float(np.linalg.norm(s)) - 1.0
    return float(modularity_term + collapse), collapse


def dmon_grad(c, graph: CsrGraph) -> np.ndarray:
    c, two_m, ac, deg, ctd, s = _dmon_parts(c, graph)
    n, k = c.shape
    grad = -(2.0 * ac - (2.0 / two_m) * np.outer(deg, ctd)) / two_m
    norm = np.linalg.norm(s)
    if norm > 0:
        grad += (math.sqrt(k) / n) * (s / norm)[None, :]
    return grad


def _mincut_parts(c, graph):
    c = _check(c, graph)
    ac = graph.adjacency() @ c
    deg = graph.degrees.astype(np.float64)
    num = float(np.einsum("ik,ik->", c, ac))
    den = float(deg @ (c * c).sum(axis=1))
    if den == 0.0:
        raise DegenerateDenominator("assignment volume Tr(C^T D C) is zero")
    gram = c.T @ c
    return c, ac, deg, num, den, gram


def _ortho_residual(gram):
    k = gram.shape[0]
    fro = np.linalg.norm(gram)
    resid = gram / fro - np.eye(k) / math.sqrt(k)
    return fro, resid, float(np.linalg.norm(resid))


def mincut_loss(c, graph: CsrGraph):
    """Returns ``(cut_term, ortho_term)``; the training loss is their sum."""
    c, ac, deg, num, den, gram = _mincut_parts(c, graph)
    _, _, ortho = _ortho_residual(gram)
    return -num / den, ortho


def mincut_grad(c, graph: CsrGraph) -> np.ndarray:
    """Gradient of ``cut_term + ortho_term``."""
    c, ac, deg, num, den, gram = _mincut_parts(c, graph)
    grad = -(2.0 * ac * den - num * 2.0 * deg[:, None] * c) / (den * den)
    fro, resid, ortho = _ortho_residual(gram)
    if ortho > 1e-15:
        g = resid / ortho
        d_gram = g / fro - gram * (np.sum(g * gram) / fro**3)
        grad += c @ (d_gram + d_gram.T)
    return grad


def dec_kl_loss(q, p) -> float:
    """Mean over nodes of KL(p_i || q_i), with 0 log 0 = 0."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if q.shape != p.shape:
        raise ShapeMismatch(f"q of shape {q.shape} against p of shape {p.shape}")
    support = p > 0
    if np.any(support & (q <= 0)):
        raise InfiniteDivergence("target puts mass where q is zero")
    terms = np.zeros_like(p)
    terms[support] = p[support] * np.log(p[support] / q[support])
    return float(terms.sum() / p.shape[0])
