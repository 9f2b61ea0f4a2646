"""
config.py
---------
Loads one TOML experiment file and turns its blocks into engine objects.

- Unknown tables and keys are rejected with the dotted field name
- Seed precedence: --seed flag, then RIGIDITY_SEED, then [experiment].seed
- Every tolerance read through `Tolerances.get` is scaled by --tol-scale and recorded
"""

import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import numpy as np

from flow.state import FlowConfig
from geometry.manifolds import (
    ManifoldModel,
    deform_metric,
    flat_torus,
    hyperbolic_disk,
    product,
    round_sphere,
    scale_metric,
)
from maps.models import (
    MapModel,
    chart_transition_map,
    constant_map,
    equator_inclusion,
    identity_map,
    linear_torus_map,
    perturbed_torus_map,
)
from utils.errors import ConfigError
from utils.logger_config import get_logger

logger = get_logger(__name__)

SEED_ENV = "RIGIDITY_SEED"
DEFAULT_OUTPUT_DIR = "results"

EXPERIMENT_KINDS = {
    "curvature": "curvature",
    "bochner": "bochner",
    "lemma": "lemma",
    "lemma-campaign": "lemma",
    "flow": "flow",
    "prescribe": "prescribe",
    "prescription": "prescribe",
}

MANIFOLD_KEYS = {"kind", "dim", "radius", "lattice", "scale", "deformation", "derivatives",
                 "fd_step1", "fd_step2", "factors"}

ALLOWED_KEYS: Dict[str, set] = {
    "experiment": {"kind", "name", "seed", "output_dir", "plots"},
    "manifold": MANIFOLD_KEYS,
    "target": MANIFOLD_KEYS,
    "map": {"kind", "matrix", "amplitude", "value", "offset", "target_chart", "derivatives",
            "fd_step1", "fd_step2"},
    "curvature": {"K", "samples", "planes_per_point", "chart", "fd_steps"},
    "bochner": {"K", "center", "spacing", "resolution", "harmonic_tol", "sweep_steps"},
    "lemma": {"m", "n", "Ks", "samples", "pool_size"},
    "flow": {"dt", "max_steps", "tau_tol", "energy_monitor", "resolution", "perturbation", "K",
             "samples"},
    "prescription": {"checks", "alpha", "lambda", "c", "samples"},
    "tolerances": None,  # free-form name -> float
}


# ---------------------------------------------------------------------
# Tolerances
# ---------------------------------------------------------------------
@dataclass
class Tolerances:
    """Tolerance lookups with overrides and a global scale; every value handed out is recorded."""

    overrides: Dict[str, float] = field(default_factory=dict)
    scale: float = 1.0
    used: Dict[str, float] = field(default_factory=dict)

    def get(self, name: str, default: float) -> float:
        value = float(self.overrides.get(name, default)) * self.scale
        self.used[name] = value
        return value

    def fixed(self, name: str, default: float) -> float:
        """A threshold that is not a tolerance (an observed order, say): overridable, never scaled."""
        value = float(self.overrides.get(name, default))
        self.used[name] = value
        return value


@dataclass
class ExperimentConfig:
    kind: str
    name: str
    seed: int
    output_dir: Path
    blocks: Dict[str, Dict[str, Any]]
    tolerances: Tolerances
    plots: bool = True
    source: Optional[Path] = None

    def block(self, name: str) -> Dict[str, Any]:
        return self.blocks.get(name, {})

    def echo(self) -> Dict[str, Any]:
        """The parsed configuration as written, with the effective seed."""
        return {"kind": self.kind, "name": self.name, "seed": self.seed, "blocks": self.blocks,
                "tol_scale": self.tolerances.scale, "tolerance_overrides": dict(self.tolerances.overrides)}


# ---------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------
def resolve_seed(configured: Optional[int], flag: Optional[int] = None) -> int:
    if flag is not None:
        return int(flag)
    env = os.getenv(SEED_ENV)
    if env is not None and env.strip():
        try:
            seed = int(env)
        except ValueError:
            raise ConfigError(f"not an integer: {env!r}", field=SEED_ENV)
        logger.info(f"Seed overridden from {SEED_ENV}: {seed}")
        return seed
    return int(configured) if configured is not None else 0


def _check_keys(raw: Mapping[str, Any]) -> None:
    for table, content in raw.items():
        if table not in ALLOWED_KEYS:
            raise ConfigError("unknown table", field=table)
        if not isinstance(content, Mapping):
            raise ConfigError("expected a table", field=table)
        allowed = ALLOWED_KEYS[table]
        if allowed is None:
            continue
        for key in content:
            if key not in allowed:
                raise ConfigError("unknown key", field=f"{table}.{key}")
        if table in ("manifold", "target"):
            for index, factor in enumerate(content.get("factors", [])):
                for key in factor:
                    if key not in MANIFOLD_KEYS:
                        raise ConfigError("unknown key", field=f"{table}.factors[{index}].{key}")


def parse_config(raw: Mapping[str, Any], seed: Optional[int] = None, tol_scale: Optional[float] = None,
                 output_dir: Optional[str] = None, expected_kind: Optional[str] = None,
                 source: Optional[Path] = None) -> ExperimentConfig:
    """Validate a decoded TOML tree; the flow block is checked eagerly so bad dt values fail here."""
    _check_keys(raw)
    experiment = raw.get("experiment", {})
    if "kind" not in experiment:
        raise ConfigError("missing experiment kind", field="experiment.kind")
    kind = EXPERIMENT_KINDS.get(str(experiment["kind"]))
    if kind is None:
        raise ConfigError(f"unknown experiment kind {experiment['kind']!r}", field="experiment.kind")
    if expected_kind is not None and kind != expected_kind:
        raise ConfigError(f"config describes a {kind} experiment, not {expected_kind}", field="experiment.kind")

    scale = 1.0 if tol_scale is None else float(tol_scale)
    if not np.isfinite(scale) or scale <= 0.0:
        raise ConfigError(f"must be positive, got {tol_scale}", field="tol_scale")
    overrides = {}
    for name, value in raw.get("tolerances", {}).items():
        if not isinstance(value, (int, float)) or value < 0:
            raise ConfigError("tolerances must be non-negative numbers", field=f"tolerances.{name}")
        overrides[name] = float(value)

    blocks = {name: dict(content) for name, content in raw.items() if name not in ("experiment", "tolerances")}
    config = ExperimentConfig(
        kind=kind,
        name=str(experiment.get("name", kind)),
        seed=resolve_seed(experiment.get("seed"), seed),
        output_dir=Path(output_dir or experiment.get("output_dir") or Path(DEFAULT_OUTPUT_DIR) / kind),
        blocks=blocks,
        tolerances=Tolerances(overrides=overrides, scale=scale),
        plots=bool(experiment.get("plots", True)),
        source=source,
    )
    if kind == "flow":
        flow_config(config)
    if kind in ("curvature", "bochner", "flow", "prescribe") and "manifold" not in blocks:
        raise ConfigError("missing manifold block", field="manifold")
    logger.info(f"Loaded {kind} experiment '{config.name}' (seed={config.seed}, tol_scale={scale:g})")
    return config


def load_config(path, seed: Optional[int] = None, tol_scale: Optional[float] = None,
                output_dir: Optional[str] = None, expected_kind: Optional[str] = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", field="config")
    try:
        with path.open("rb") as handle:
            raw = tomllib.load(handle)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in {path}: {e}", field="config") from e
    return parse_config(raw, seed=seed, tol_scale=tol_scale, output_dir=output_dir,
                        expected_kind=expected_kind, source=path)


# ---------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------
def _number(block: Mapping[str, Any], key: str, prefix: str, default=None, positive: bool = False):
    value = block.get(key, default)
    if value is None:
        raise ConfigError("missing value", field=f"{prefix}.{key}")
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}", field=f"{prefix}.{key}")
    if positive and value <= 0:
        raise ConfigError(f"must be positive, got {value}", field=f"{prefix}.{key}")
    return value


def _matrix(value, prefix: str, key: str, shape=None) -> np.ndarray:
    try:
        array = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"not a numeric array: {value!r}", field=f"{prefix}.{key}") from e
    if shape is not None and array.shape != shape:
        raise ConfigError(f"expected shape {shape}, got {array.shape}", field=f"{prefix}.{key}")
    return array


def build_manifold(block: Mapping[str, Any], prefix: str = "manifold") -> ManifoldModel:
    """ManifoldModel from a [manifold]/[target] block, with scale/deformation/derivative options applied."""
    kind = block.get("kind")
    dim = int(_number(block, "dim", prefix, default=2, positive=True))
    if kind == "flat_torus":
        lattice = _matrix(block["lattice"], prefix, "lattice", (dim, dim)) if "lattice" in block else None
        manifold = flat_torus(dim, lattice)
    elif kind == "round_sphere":
        manifold = round_sphere(dim, float(_number(block, "radius", prefix, default=1.0, positive=True)))
    elif kind == "hyperbolic_disk":
        manifold = hyperbolic_disk(dim, float(_number(block, "radius", prefix, default=1.0, positive=True)))
    elif kind == "product":
        factors = block.get("factors", [])
        if len(factors) != 2:
            raise ConfigError("product needs exactly two factors", field=f"{prefix}.factors")
        manifold = product(build_manifold(factors[0], f"{prefix}.factors[0]"),
                           build_manifold(factors[1], f"{prefix}.factors[1]"))
    else:
        raise ConfigError(f"unknown manifold kind {kind!r}", field=f"{prefix}.kind")

    if "scale" in block:
        manifold = scale_metric(manifold, float(_number(block, "scale", prefix, positive=True)))
    if "deformation" in block:
        manifold = deform_metric(manifold, _matrix(block["deformation"], prefix, "deformation",
                                                   (manifold.dim, manifold.dim)))
    mode = block.get("derivatives", "analytic")
    if mode not in ("analytic", "fd"):
        raise ConfigError(f"expected 'analytic' or 'fd', got {mode!r}", field=f"{prefix}.derivatives")
    if mode == "fd":
        manifold = manifold.with_derivatives("fd", block.get("fd_step1"), block.get("fd_step2"))
    return manifold


def build_map(block: Mapping[str, Any], source: ManifoldModel, target: Optional[ManifoldModel],
              source_block: Optional[Mapping[str, Any]] = None,
              target_block: Optional[Mapping[str, Any]] = None) -> MapModel:
    """MapModel from a [map] block; target defaults to the source."""
    prefix = "map"
    kind = block.get("kind", "identity")
    target = source if target is None else target
    if kind == "constant":
        value = _matrix(block.get("value", np.zeros(target.dim)), prefix, "value", (target.dim,))
        phi = constant_map(source, target, value, target_chart=int(block.get("target_chart", 0)))
    elif kind == "identity":
        phi = identity_map(source, target)
    elif kind == "linear_torus":
        if "matrix" not in block:
            raise ConfigError("missing matrix", field="map.matrix")
        phi = linear_torus_map(source, target, _matrix(block["matrix"], prefix, "matrix", (target.dim, source.dim)),
                               block.get("offset"))
    elif kind == "perturbed_torus":
        matrix = _matrix(block["matrix"], prefix, "matrix", (target.dim, source.dim)) if "matrix" in block else None
        phi = perturbed_torus_map(source, target, matrix, float(_number(block, "amplitude", prefix, default=0.1)),
                                  block.get("offset"))
    elif kind == "equator_inclusion":
        circle = float((source_block or {}).get("radius", 1.0))
        sphere = float((target_block or {}).get("radius", 1.0))
        phi = equator_inclusion(circle, sphere)
    elif kind == "chart_transition":
        phi = chart_transition_map(source)
    else:
        raise ConfigError(f"unknown map kind {kind!r}", field="map.kind")

    mode = block.get("derivatives", "analytic")
    if mode not in ("analytic", "fd"):
        raise ConfigError(f"expected 'analytic' or 'fd', got {mode!r}", field="map.derivatives")
    if mode == "fd":
        phi = phi.with_derivatives("fd", block.get("fd_step1"), block.get("fd_step2"))
    return phi


def experiment_map(config: ExperimentConfig) -> MapModel:
    source = build_manifold(config.block("manifold"), "manifold")
    target = build_manifold(config.block("target"), "target") if "target" in config.blocks else None
    return build_map(config.block("map"), source, target, config.block("manifold"), config.block("target"))


def flow_config(config: ExperimentConfig) -> FlowConfig:
    block = config.block("flow")
    flow = FlowConfig(
        dt=float(_number(block, "dt", "flow")),
        max_steps=int(block.get("max_steps", 10_000)),
        tau_tol=config.tolerances.get("flow.tau_tol", float(block.get("tau_tol", 1e-8))),
        energy_monitor=bool(block.get("energy_monitor", True)),
        seed=config.seed,
        resolution=int(block.get("resolution", 32)),
        perturbation=float(block.get("perturbation", 0.0)),
    )
    flow.validate()
    return flow
