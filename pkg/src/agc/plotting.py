"""
Report figures written next to the delimited outputs of a bench run.
"""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def figsize(scale=1.0):
    width = 6.0 * scale
    return width, width * (math.sqrt(5.0) - 1.0) / 2.0


def plot_training_curves(runs, path):
    fig, ax = plt.subplots(figsize=figsize())
    for run in runs:
        epochs = [rec.epoch for rec in run.training_log]
        ax.plot(epochs, [rec.loss for rec in run.training_log], lw=1, label=f"seed {run.seed}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_metric_bars(aggregate, path):
    keys = [k for k in ("acc", "nmi", "ari", "f1", "homogeneity", "completeness", "modularity", "conductance") if k in aggregate]
    fig, ax = plt.subplots(figsize=figsize())
    means = [aggregate[k]["mean"] for k in keys]
    stds = [aggregate[k]["std"] for k in keys]
    ax.bar(np.arange(len(keys)), means, yerr=stds, capsize=3, color="0.55")
    ax.set_xticks(np.arange(len(keys)))
    ax.set_xticklabels(keys, rotation=30, ha="right")
    ax.set_ylabel("mean $\\pm$ SD over seeds")
    ax.axhline(0.0, color="k", lw=0.5)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_cluster_sizes(labels, path):
    sizes = np.sort(np.bincount(labels))[::-1]
    fig, ax = plt.subplots(figsize=figsize(0.8))
    ax.bar(np.arange(sizes.shape[0]), sizes, color="0.35")
    ax.set_xlabel("cluster (by size)")
    ax.set_ylabel("nodes")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_figures(result, out_dir):
    """Write the standard figure set; returns the written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    with plt.rc_context(STYLE):
        logged = [r for r in result.runs if r.training_log]
        if logged:
            path = out_dir / "training_loss.png"
            plot_training_curves(logged, path)
            written.append(path)
        path = out_dir / "metrics.png"
        plot_metric_bars(result.aggregate, path)
        written.append(path)
        path = out_dir / "cluster_sizes.png"
        plot_cluster_sizes(result.runs[0].labels, path)
        written.append(path)
    return written
