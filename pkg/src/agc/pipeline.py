"""Config-driven runs: load or generate, encode, cluster, evaluate, profile.

Output directory layout (everything except ``profile.json`` and the figures
is byte-stable for a fixed config, seed list and ``AGC_THREADS``)::

    metrics_seed<S>.json      one MetricsReport per seed, profiling fields omitted
    metrics_summary.json      per-seed reports plus mean/SD aggregate
    summary.tsv               metric<TAB>mean<TAB>std
    assignments_seed<S>.tsv   hard cluster id per node
    training_log_seed<S>.tsv  epoch<TAB>loss<TAB>aux<TAB>wall_ms (neural methods)
    profile.json              wall time, peak RSS and phase split per run
    figures/*.png             loss curves, metric bars, cluster sizes
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import PipelineConfig
from .encode import smooth, standardize_features
from .errors import AgcError
from .graph import Dataset, SbmSpec, generate_sbm, load_dataset, sbm_features
from .heads import KMeansConfig, kmeans_fit
from .metrics import MetricsReport, aggregate, evaluate
from .profiling import Profiler, RunProfile
from .train import TrainConfig, train, write_training_log

log = logging.getLogger(__name__)


@dataclass
class RunOutput:
    seed: int
    labels: np.ndarray
    report: MetricsReport
    profile: RunProfile
    training_log: Optional[list] = None


@dataclass
class PipelineResult:
    runs: List[RunOutput]
    aggregate: dict
    setup_profile: RunProfile
    failed: Optional[dict] = None

    @property
    def reports(self):
        return [r.report for r in self.runs]

    @property
    def profiles(self):
        return [r.profile for r in self.runs]


def load_inputs(cfg: PipelineConfig) -> Dataset:
    if isinstance(cfg.dataset, SbmSpec):
        graph, labels = generate_sbm(cfg.dataset)
        return Dataset(graph, sbm_features(cfg.dataset, labels), labels)
    return load_dataset(cfg.dataset)


def encode_inputs(cfg: PipelineConfig, data: Dataset) -> np.ndarray:
    x = data.features
    if cfg.standardize:
        x = standardize_features(x)
    if cfg.smoothing is not None:
        x = smooth(data.graph, x, cfg.smoothing)
    return x


def run_method(cfg: PipelineConfig, graph, z, seed: int):
    """Returns ``(hard_labels, training_log or None)``."""
    params = cfg.method_params
    if cfg.method == "kmeans":
        result = kmeans_fit(z, KMeansConfig(k=cfg.k, seed=seed, **params))
        return result.labels, None
    state, soft, training_log = train(graph, z, TrainConfig(cfg.method, cfg.k, seed=seed, **params))
    return np.argmax(soft, axis=1), training_log


def run_single(cfg: PipelineConfig, data: Dataset, z, seed: int) -> RunOutput:
    prof = Profiler()
    with prof.phase("cluster"):
        labels, training_log = run_method(cfg, data.graph, z, seed)
    with prof.phase("evaluate"):
        report = evaluate(data.graph, labels, data.labels)
    profile = prof.finish()
    return RunOutput(seed, labels, report, profile, training_log)


def run_pipeline(cfg: PipelineConfig, write: bool = True) -> PipelineResult:
    """One run per seed, then mean and population SD over runs.

    A failing seed stops the batch; finished runs are still written and the
    exception is re-raised with its run index attached.
    """
    setup = Profiler()
    with setup.phase("load"):
        data = load_inputs(cfg)
    with setup.phase("encode"):
        z = encode_inputs(cfg, data)
    setup_profile = setup.finish()

    runs: List[RunOutput] = []
    failure = None
    if cfg.parallel_seeds and len(cfg.seeds) > 1:
        with ThreadPoolExecutor(max_workers=len(cfg.seeds)) as pool:
            futures = [pool.submit(run_single, cfg, data, z, s) for s in cfg.seeds]
            for i, fut in enumerate(futures):
                try:
                    out = fut.result()
                except AgcError as exc:
                    failure = failure or (i, exc)
                    continue
                out.profile.mem_shared = True
                if failure is None:
                    runs.append(out)
    else:
        for i, seed in enumerate(cfg.seeds):
            log.info("run %d/%d (seed %d)", i + 1, len(cfg.seeds), seed)
            try:
                runs.append(run_single(cfg, data, z, seed))
            except AgcError as exc:
                failure = (i, exc)
                break

    result = PipelineResult(runs, aggregate([r.report for r in runs]), setup_profile)
    if failure is not None:
        i, exc = failure
        result.failed = {"run_index": i, "seed": cfg.seeds[i], "error": str(exc)}
    if write:
        write_outputs(cfg, result)
    if failure is not None:
        i, exc = failure
        exc.run_index = i
        exc.args = (f"run {i} (seed {cfg.seeds[i]}): {exc}",)
        raise exc
    return result


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def write_outputs(cfg: PipelineConfig, result: PipelineResult) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for run in result.runs:
        _dump(out / f"metrics_seed{run.seed}.json", run.report.to_dict(profile=False))
        np.savetxt(out / f"assignments_seed{run.seed}.tsv", run.labels, fmt="%d")
        if run.training_log is not None:
            write_training_log(out / f"training_log_seed{run.seed}.tsv", run.training_log)
    summary = {
        "method": cfg.method,
        "k": cfg.k,
        "seeds": [r.seed for r in result.runs],
        "runs": [r.report.to_dict(profile=False) for r in result.runs],
        "aggregate": result.aggregate,
    }
    if result.failed is not None:
        summary["failed"] = result.failed
    _dump(out / "metrics_summary.json", summary)
    with open(out / "summary.tsv", "w") as fh:
        fh.write("metric\tmean\tstd\n")
        for key, stats in result.aggregate.items():
            fh.write(f"{key}\t{stats['mean']!r}\t{stats['std']!r}\n")
    _dump(
        out / "profile.json",
        {
            "setup": result.setup_profile.to_dict(),
            "runs": [{"seed": r.seed, **r.profile.to_dict()} for r in result.runs],
        },
    )
    if cfg.figures and result.runs:
        from .plotting import render_figures

        render_figures(result, out / "figures")
    return out
