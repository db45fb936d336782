"""Joint training of an MLP encoder with a differentiable cluster head.

``dmon`` and ``mincut`` put a softmax on the MLP output; ``dec`` treats the
MLP output as an embedding, scores it against learnable prototypes with a
Student-t kernel and fits a periodically refreshed sharpened target.
Mini-batch mode evaluates the same losses on uniformly sampled induced
subgraphs, using the subgraph's own degrees and edge count.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .errors import EmptyGraph, InvalidConfig, NumericalFailure, ShapeMismatch
from .graph import CsrGraph, induced_subgraph
from .heads import KMeansConfig, dec_target, kmeans_fit, squared_distances, student_t_assign
from .losses import dec_kl_loss, dmon_grad, dmon_loss, mincut_grad, mincut_loss
from .mlp import (
    AdamState,
    MlpParams,
    adam_step,
    init_mlp,
    mlp_backward,
    mlp_forward,
    softmax,
    softmax_backward,
)

OBJECTIVES = ("dmon", "mincut", "dec")


@dataclass(frozen=True)
class TrainConfig:
    objective: str
    k: int
    epochs: int = 200
    lambda_clust: float = 1.0
    batch_nodes: Optional[int] = None
    target_refresh: int = 5
    seed: int = 0
    hidden: int = 64
    embed_dim: int = 16
    nu: float = 1.0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise InvalidConfig(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")
        if self.k < 1:
            raise InvalidConfig("k must be >= 1")
        if self.lambda_clust < 0:
            raise InvalidConfig("lambda_clust must be >= 0")
        if self.batch_nodes is not None and self.batch_nodes < 1:
            raise InvalidConfig("batch_nodes must be >= 1")
        if self.target_refresh < 1:
            raise InvalidConfig("target_refresh must be >= 1")
        if self.hidden < 1 or self.embed_dim < 1 or self.nu <= 0 or self.lr <= 0:
            raise InvalidConfig("hidden, embed_dim, nu and lr must be positive")


class SubgraphBatch(NamedTuple):
    node_ids: np.ndarray
    local_graph: CsrGraph
    local_features: np.ndarray


def sample_induced_subgraph(graph: CsrGraph, batch_nodes: int, rng: np.random.Generator, features=None):
    """Uniformly sample ``batch_nodes`` distinct nodes and their induced subgraph."""
    if not 1 <= batch_nodes <= graph.num_nodes:
        raise InvalidConfig(f"batch_nodes must lie in [1, {graph.num_nodes}], got {batch_nodes}")
    nodes = np.sort(rng.choice(graph.num_nodes, size=batch_nodes, replace=False))
    local_x = None if features is None else np.asarray(features)[nodes]
    return SubgraphBatch(nodes, induced_subgraph(graph, nodes), local_x)


def _check_grads(grads):
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalFailure(name)
    return grads


def backward(kind: str, graph: CsrGraph, x, params: MlpParams, target=None, nu: float = 1.0, scale: float = 1.0):
    """Loss and exact gradients for one forward pass.

    Returns ``(loss, aux, grads)`` where ``aux`` is the collapse term (dmon),
    the orthogonality term (mincut) or 0 (dec). ``target`` is the sharpened
    distribution required by ``dec``; prototypes live in ``params["mu"]``.
    Loss and gradients are multiplied by ``scale``.
    """
    if kind not in OBJECTIVES:
        raise InvalidConfig(f"unknown loss kind {kind!r}")
    out, cache = mlp_forward(x, params)
    if out.shape[0] != graph.num_nodes:
        raise ShapeMismatch(f"{out.shape[0]} feature rows for {graph.num_nodes} nodes")
    if kind == "dec":
        if target is None:
            raise InvalidConfig("dec needs a target distribution")
        mu = params["mu"]
        q = student_t_assign(out, mu, nu)
        loss, aux = dec_kl_loss(q, target), 0.0
        n = out.shape[0]
        d2 = squared_distances(out, mu)
        # d loss / d d2_ik for a fixed target
        g = (q - target) * (-(nu + 1.0) / (2.0 * (nu + d2))) / n
        diff = out[:, None, :] - mu[None, :, :]
        d_out = 2.0 * np.einsum("nk,nkd->nd", g, diff)
        d_mu = -2.0 * np.einsum("nk,nkd->kd", g, diff)
        grads = mlp_backward(d_out * scale, cache, params)
        grads["mu"] = d_mu * scale
    else:
        c = softmax(out)
        if kind == "dmon":
            loss, aux = dmon_loss(c, graph)
            d_c = dmon_grad(c, graph)
        else:
            cut, aux = mincut_loss(c, graph)
            loss = cut + aux
            d_c = mincut_grad(c, graph)
        grads = mlp_backward(softmax_backward(d_c, c) * scale, cache, params)
    return loss * scale, aux, _check_grads(grads)


def predict(kind: str, x, params: MlpParams, nu: float = 1.0) -> np.ndarray:
    """Soft assignment of every row of ``x`` under trained parameters."""
    out, _ = mlp_forward(x, params)
    if kind == "dec":
        return student_t_assign(out, params["mu"], nu)
    return softmax(out)


@dataclass
class ModelState:
    params: MlpParams
    adam: AdamState
    objective: str


@dataclass
class LogRecord:
    epoch: int
    loss: float
    aux: float
    wall_ms: float

    def line(self) -> str:
        return f"{self.epoch}\t{self.loss!r}\t{self.aux!r}\t{self.wall_ms:.3f}"


@dataclass
class TrainResult:
    state: ModelState
    assignment: np.ndarray
    log: List[LogRecord] = field(default_factory=list)

    def __iter__(self):
        return iter((self.state, self.assignment, self.log))


def write_training_log(path, log) -> None:
    with open(path, "w") as fh:
        for rec in log:
            fh.write(rec.line() + "\n")


def train(graph: CsrGraph, features, cfg: TrainConfig) -> TrainResult:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != graph.num_nodes:
        raise ShapeMismatch(f"features of shape {x.shape} for {graph.num_nodes} nodes")
    rng = np.random.default_rng(cfg.seed)
    batch_rng = np.random.default_rng([cfg.seed, 2])
    out_dim = cfg.embed_dim if cfg.objective == "dec" else cfg.k
    params = init_mlp(x.shape[1], cfg.hidden, out_dim, rng)
    if cfg.objective == "dec":
        z0, _ = mlp_forward(x, params)
        params["mu"] = kmeans_fit(z0, KMeansConfig(k=cfg.k, seed=cfg.seed)).centers
    adam = AdamState(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    log: List[LogRecord] = []
    target = None

    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        if cfg.objective == "dec" and (epoch - 1) % cfg.target_refresh == 0:
            target = dec_target(predict("dec", x, params, cfg.nu))

        if cfg.batch_nodes is None:
            loss, aux, grads = backward(
                cfg.objective, graph, x, params, target, cfg.nu, cfg.lambda_clust
            )
            params, adam = adam_step(params, grads, adam)
        else:
            losses, auxes = [], []
            for _ in range(math.ceil(graph.num_nodes / cfg.batch_nodes)):
                batch = sample_induced_subgraph(graph, cfg.batch_nodes, batch_rng, x)
                if batch.local_graph.num_edges == 0:
                    continue
                local_target = None if target is None else target[batch.node_ids]
                try:
                    loss_b, aux_b, grads = backward(
                        cfg.objective,
                        batch.local_graph,
                        batch.local_features,
                        params,
                        local_target,
                        cfg.nu,
                        cfg.lambda_clust,
                    )
                except EmptyGraph:
                    continue
                params, adam = adam_step(params, grads, adam)
                losses.append(loss_b)
                auxes.append(aux_b)
            loss = float(np.mean(losses)) if losses else float("nan")
            aux = float(np.mean(auxes)) if auxes else float("nan")
        log.append(LogRecord(epoch, float(loss), float(aux), (time.perf_counter() - t0) * 1e3))

    assignment = predict(cfg.objective, x, params, cfg.nu)
    return TrainResult(ModelState(params, adam, cfg.objective), assignment, log)
