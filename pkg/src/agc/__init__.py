"""Attributed graph clustering: encode, cluster, optimize, evaluate."""

from .encode import SmoothingConfig, normalized_propagate, ssgc_smooth, standardize_features
from .errors import AgcError
from .graph import (
    CsrGraph,
    GraphStats,
    SbmSpec,
    build_graph,
    generate_sbm,
    homophily,
    load_dataset,
    save_dataset,
    sbm_features,
)
from .heads import KMeansConfig, dec_target, kmeans_assign, kmeans_fit, student_t_assign
from .metrics import MetricsReport, evaluate, modularity, conductance
from .train import TrainConfig, train

__version__ = "0.1.0"
