"""Command line entry point ``agc``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import pipeline
from .config import load_config
from .encode import SmoothingConfig, smooth, standardize_features
from .errors import AgcError, DataError, ParseError
from .graph import (
    EMBEDDING_MAGIC,
    SbmSpec,
    generate_sbm,
    load_dataset,
    save_dataset,
    sbm_features,
    write_matrix_bin,
)
from .heads import KMeansConfig, kmeans_fit
from .metrics import evaluate
from .profiling import Profiler

log = logging.getLogger("agc")


def _int_list(text):
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _read_assignments(path):
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    labels = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            labels.append(int(line))
        except ValueError:
            raise ParseError(path, lineno, f"not an integer: {line.strip()!r}") from None
    return np.array(labels, dtype=np.int64)


def _report_json(report):
    return json.dumps(report.to_dict(profile=True), indent=2) + "\n"


def cmd_gen_sbm(args):
    spec = SbmSpec(
        args.blocks, args.p_in, args.p_out, args.seed,
        feature_dim=args.feature_dim, feature_signal=args.feature_signal,
    )
    graph, labels = generate_sbm(spec)
    save_dataset(args.out, graph, sbm_features(spec, labels), labels)
    print(f"wrote {graph.num_nodes} nodes, {graph.num_edges} edges to {args.out}")


def cmd_smooth(args):
    data = load_dataset(args.input)
    x = standardize_features(data.features) if args.standardize else data.features
    cfg = SmoothingConfig(args.hops, args.alpha, not args.no_self_loops, args.variant)
    z = smooth(data.graph, x, cfg)
    write_matrix_bin(args.out, z, magic=EMBEDDING_MAGIC)
    print(f"wrote {z.shape[0]}x{z.shape[1]} embedding to {args.out}")


def cmd_cluster(args):
    prof = Profiler()
    with prof.phase("load"):
        data = load_dataset(args.input)
    with prof.phase("encode"):
        z = data.features
        if args.hops > 0:
            z = smooth(data.graph, z, SmoothingConfig(args.hops, args.alpha))
    with prof.phase("cluster"):
        result = kmeans_fit(
            z,
            KMeansConfig(
                k=args.k, seed=args.seed, max_iters=args.max_iters, tol=args.tol,
                batch_size=args.batch_size,
            ),
        )
    with prof.phase("evaluate"):
        report = evaluate(data.graph, result.labels, data.labels)
    profile = prof.finish()
    report.seconds = profile.wall_seconds
    report.peak_mem_bytes = profile.peak_mem_bytes
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "assignments.tsv", result.labels, fmt="%d")
    (out / "metrics.json").write_text(_report_json(report))
    print(_report_json(report), end="")


def cmd_train(args):
    cfg = load_config(args.config)
    cfg.seeds = cfg.seeds[:1]
    cfg.figures = False
    result = pipeline.run_pipeline(cfg)
    run = result.runs[0]
    out = Path(cfg.output_dir)
    np.savetxt(out / "assignments.tsv", run.labels, fmt="%d")
    report = run.report
    report.seconds = run.profile.wall_seconds
    report.peak_mem_bytes = run.profile.peak_mem_bytes
    (out / "metrics.json").write_text(_report_json(report))
    print(_report_json(report), end="")


def cmd_eval(args):
    start = time.monotonic()
    data = load_dataset(args.input)
    pred = _read_assignments(args.assignments)
    prof = Profiler()
    with prof.phase("evaluate"):
        report = evaluate(data.graph, pred, data.labels)
    profile = prof.finish()
    report.seconds = time.monotonic() - start
    report.peak_mem_bytes = profile.peak_mem_bytes
    text = _report_json(report)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")


def cmd_bench(args):
    cfg = load_config(args.config)
    result = pipeline.run_pipeline(cfg)
    print("metric\tmean\tstd")
    for key, stats in result.aggregate.items():
        print(f"{key}\t{stats['mean']:.6f}\t{stats['std']:.6f}")
    print(f"outputs in {Path(cfg.output_dir).resolve()}", file=sys.stderr)


def build_parser():
    parser = argparse.ArgumentParser(prog="agc", description="Attributed graph clustering engine.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-sbm", help="sample a planted-partition dataset")
    p.add_argument("--blocks", type=_int_list, required=True, help="block sizes, e.g. 100,100")
    p.add_argument("--p-in", type=float, required=True)
    p.add_argument("--p-out", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--feature-signal", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_sbm)

    p = sub.add_parser("smooth", help="write smoothed node features")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--hops", type=int, default=16)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--variant", choices=("ssgc_average", "sgc_power"), default="ssgc_average")
    p.add_argument("--no-self-loops", action="store_true")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("cluster", help="KMeans on (optionally smoothed) features")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hops", type=int, default=0, help="SSGC hops before clustering; 0 disables")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--max-iters", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=None, help="switch to mini-batch KMeans")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("train", help="run the config's method for its first seed")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score an assignment file against a dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--assignments", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="all seeds, aggregate report and figures")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except AgcError as exc:
        print(f"agc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"agc: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
