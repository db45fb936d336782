"""Strict YAML pipeline configuration.

Only plain scalars, maps and sequences are accepted: anchors, aliases and
tags are rejected so that every document parses the same way everywhere.
Unknown keys are errors, never silently ignored.

Example::

    dataset:
      sbm: {blocks: [100, 100], p_in: 0.3, p_out: 0.02, seed: 0}
    smoothing: {hops: 4, alpha: 0.05}
    method: dmon
    method_params: {epochs: 200, lr: 0.01}
    k: 2
    seeds: [0, 1, 2, 3, 4]
    output_dir: runs/dmon
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import yaml

from .encode import SmoothingConfig
from .errors import ConfigError, ConfigTypeError, InvalidConfig, UnknownKey
from .graph import SbmSpec

METHODS = ("kmeans", "dmon", "mincut", "dec")

_KMEANS_DEFAULTS = {"max_iters": 300, "tol": 1e-4, "init": "kmeanspp", "batch_size": None}
_NEURAL_DEFAULTS = {
    "epochs": 200,
    "lambda_clust": 1.0,
    "batch_nodes": None,
    "hidden": 64,
    "lr": 1e-3,
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
}
_DEC_DEFAULTS = {"target_refresh": 5, "embed_dim": 16, "nu": 1.0}

METHOD_DEFAULTS = {
    "kmeans": _KMEANS_DEFAULTS,
    "dmon": _NEURAL_DEFAULTS,
    "mincut": _NEURAL_DEFAULTS,
    "dec": {**_NEURAL_DEFAULTS, **_DEC_DEFAULTS},
}

# expected python types per key; int is accepted wherever float is
_TYPES = {
    "max_iters": int, "tol": float, "init": str, "batch_size": (int, type(None)),
    "epochs": int, "lambda_clust": float, "batch_nodes": (int, type(None)),
    "hidden": int, "lr": float, "beta1": float, "beta2": float, "eps": float,
    "target_refresh": int, "embed_dim": int, "nu": float,
    "blocks": list, "p_in": float, "p_out": float, "seed": int,
    "feature_dim": int, "feature_signal": float,
    "hops": int, "alpha": float, "self_loops": bool, "variant": str,
    "path": str, "k": int, "seeds": list, "output_dir": str, "method": str,
    "standardize": bool, "figures": bool, "parallel_seeds": bool,
}


@dataclass
class PipelineConfig:
    dataset: Union[Path, SbmSpec]
    method: str
    k: int
    seeds: list
    smoothing: Optional[SmoothingConfig] = None
    standardize: bool = False
    method_params: dict = field(default_factory=dict)
    output_dir: Path = Path("runs")
    figures: bool = True
    parallel_seeds: bool = False


def _check_type(path: str, value):
    key = path.rsplit(".", 1)[-1]
    expected = _TYPES.get(key)
    if expected is None:
        return value
    if isinstance(value, bool) and expected is not bool:
        raise ConfigTypeError(f"{path}: expected {_type_name(expected)}, got a boolean")
    if expected is float and isinstance(value, int):
        return float(value)
    if not isinstance(value, expected):
        raise ConfigTypeError(
            f"{path}: expected {_type_name(expected)}, got {type(value).__name__}"
        )
    return value


def _type_name(t):
    if isinstance(t, tuple):
        return " or ".join(x.__name__ for x in t if x is not type(None)) + " or null"
    return t.__name__


def _take(table: dict, allowed, prefix: str = "") -> dict:
    if not isinstance(table, dict):
        raise ConfigTypeError(f"{prefix.rstrip('.') or 'document'}: expected a mapping")
    for key in table:
        if key not in allowed:
            raise UnknownKey(f"{prefix}{key}")
    return {k: _check_type(prefix + k, v) for k, v in table.items()}


def _reject_yaml_extensions(text: str) -> None:
    try:
        for event in yaml.parse(text, Loader=yaml.SafeLoader):
            if isinstance(event, yaml.AliasEvent) or getattr(event, "anchor", None):
                raise ConfigTypeError("anchors and aliases are not supported")
            tag = getattr(event, "tag", None)
            if tag and not getattr(event, "implicit", (True,))[0] and tag != "!":
                raise ConfigTypeError(f"explicit tag {tag!r} is not supported")
    except yaml.YAMLError as exc:
        raise ConfigTypeError(f"malformed YAML: {exc}") from None


def _ints(path, values):
    if not isinstance(values, list) or not values:
        raise ConfigTypeError(f"{path}: expected a non-empty list of integers")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigTypeError(f"{path}: expected integers, got {v!r}")
    return list(values)


def _parse_dataset(raw, base: Path):
    ds = _take(raw, ("path", "sbm"), "dataset.")
    if ("path" in ds) == ("sbm" in ds):
        raise InvalidConfig("dataset needs exactly one of 'path' or 'sbm'")
    if "path" in ds:
        return base / ds["path"]
    sbm = _take(
        ds["sbm"],
        ("blocks", "p_in", "p_out", "seed", "feature_dim", "feature_signal"),
        "dataset.sbm.",
    )
    for required in ("blocks", "p_in", "p_out"):
        if required not in sbm:
            raise InvalidConfig(f"dataset.sbm.{required} is required")
    return SbmSpec(
        block_sizes=_ints("dataset.sbm.blocks", sbm["blocks"]),
        p_in=sbm["p_in"],
        p_out=sbm["p_out"],
        seed=sbm.get("seed", 0),
        feature_dim=sbm.get("feature_dim", 16),
        feature_signal=sbm.get("feature_signal", 0.5),
    )


def parse_config(text: str, base_dir=None) -> PipelineConfig:
    """Validate a configuration document and fill defaults.

    Relative paths (dataset, output directory) resolve against ``base_dir``,
    which defaults to the current directory.

    Raises
    ------
    UnknownKey
        For any key outside the schema.
    ConfigTypeError
        For a value of the wrong type or unsupported YAML features.
    InvalidConfig
        For missing required keys or out-of-range values.
    """
    base = Path(base_dir) if base_dir is not None else Path(".")
    _reject_yaml_extensions(text)
    raw = yaml.safe_load(text)
    top = _take(
        raw if raw is not None else {},
        (
            "dataset", "smoothing", "standardize", "method", "method_params", "k",
            "seeds", "output_dir", "figures", "parallel_seeds",
        ),
    )
    for required in ("dataset", "method", "k", "seeds"):
        if required not in top:
            raise InvalidConfig(f"missing required key {required!r}")
    method = top["method"]
    if method not in METHODS:
        raise InvalidConfig(f"method must be one of {METHODS}, got {method!r}")
    if top["k"] < 1:
        raise InvalidConfig("k must be >= 1")
    seeds = _ints("seeds", top["seeds"])

    smoothing = None
    if top.get("smoothing") is not None:
        sm = _take(top["smoothing"], ("hops", "alpha", "self_loops", "variant"), "smoothing.")
        smoothing = SmoothingConfig(
            num_hops=sm.get("hops", 16),
            alpha=sm.get("alpha", 0.05),
            add_self_loops=sm.get("self_loops", True),
            variant=sm.get("variant", "ssgc_average"),
        )

    defaults = METHOD_DEFAULTS[method]
    params = dict(defaults)
    params.update(_take(top.get("method_params") or {}, defaults, "method_params."))

    return PipelineConfig(
        dataset=_parse_dataset(top["dataset"], base),
        method=method,
        k=top["k"],
        seeds=seeds,
        smoothing=smoothing,
        standardize=top.get("standardize", False),
        method_params=params,
        output_dir=base / top.get("output_dir", "runs"),
        figures=top.get("figures", True),
        parallel_seeds=top.get("parallel_seeds", False),
    )


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)
