"""
experiments.py
--------------
One runner per CLI subcommand. Each runner reads its config blocks, calls the engines and
returns an ExperimentOutcome (checks, tables, results, extra JSON artifacts, plots).

Runners never write files; the CLI does.
"""

from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from bochner.grid import GridSpec, bochner_residual, certify_subharmonic
from flow.heat_flow import run_flow
from flow.rigidity import RigidityVerdict, Verdict, rigidity_diagnostics
from geometry.curvature import curvature_bundle, curvature_symmetry_defects, sec_upper_bound_check, \
    sectional_samples
from geometry.linalg import operator_norm
from geometry.manifolds import ManifoldKind, ManifoldModel
from lemmas.campaign import POOL_SIZE, run_lemma_campaign
from maps.models import identity_map
from prescription.residuals import (
    StructureSpec,
    conservativity_residual,
    hamilton_corollary_check,
    harmonic_einstein_residual,
    harmonic_einstein_rigidity,
    homothety_fit,
    prescribed_ricci_residual,
)
from reports.builders import Check, at_least, at_most, flag, not_applicable
from reports.config import ExperimentConfig, build_manifold, build_map, experiment_map, flow_config
from reports.writer import emit_convergence_table
from utils.errors import ConfigError, ConvergenceTableError, HarmonicityPreconditionError
from utils.logger_config import get_logger

logger = get_logger(__name__)

MAX_WITNESSES = 20


@dataclass(frozen=True)
class PlotSpec:
    table: str
    x: str
    y: str
    filename: str
    title: str = ""
    logx: bool = False


@dataclass
class ExperimentOutcome:
    checks: List[Check] = field(default_factory=list)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    results: Dict[str, object] = field(default_factory=dict)
    artifacts: Dict[str, object] = field(default_factory=dict)  # extra JSON files
    plots: List[PlotSpec] = field(default_factory=list)


def verdict_dict(verdict: RigidityVerdict) -> Dict[str, object]:
    row = asdict(verdict)
    row["verdict"] = verdict.verdict.value
    return row


def _convergence(outcome: ExperimentOutcome, config: ExperimentConfig, name: str,
                 series: List[tuple], min_order_key: str, steps_field: str) -> None:
    try:
        table = emit_convergence_table(series)
    except ConvergenceTableError as e:
        raise ConfigError(str(e), field=steps_field) from e
    outcome.tables[f"{name}_convergence"] = table.table
    outcome.checks.append(at_least(f"{name}.observed_order", table.final_order,
                                   config.tolerances.fixed(min_order_key, 1.9)))
    outcome.plots.append(PlotSpec(f"{name}_convergence", "h", "residual", f"{name}_convergence.svg",
                                  f"{name}: residual vs step", logx=True))


# ---------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------
def constant_curvature_of(manifold: ManifoldModel, block) -> Optional[float]:
    """Sectional curvature of the unperturbed model spaces; None when there is no closed form."""
    if "deformation" in block:
        return None
    scale = float(manifold.params.get("scale", 1.0))
    if manifold.kind == ManifoldKind.FLAT_TORUS:
        return 0.0
    if manifold.kind == ManifoldKind.ROUND_SPHERE:
        return 1.0 / (scale * float(manifold.params["radius"]) ** 2)
    if manifold.kind == ManifoldKind.HYPERBOLIC_DISK:
        return -1.0 / (scale * float(manifold.params["radius"]) ** 2)
    return None


def _sectional_error(manifold: ManifoldModel, points: np.ndarray, k: float, chart: int,
                     rng: np.random.Generator, planes: int) -> float:
    worst = 0.0
    for point in points:
        xs, ys = rng.normal(size=(planes, manifold.dim)), rng.normal(size=(planes, manifold.dim))
        values = sectional_samples(curvature_bundle(manifold, point, chart), xs, ys)
        values = values[np.isfinite(values)]
        if values.size:
            worst = max(worst, float(np.max(np.abs(values - k))))
    return worst


def run_curvature(config: ExperimentConfig) -> ExperimentOutcome:
    block = config.block("curvature")
    manifold_block = config.block("manifold")
    manifold = build_manifold(manifold_block, "manifold")
    samples = int(block.get("samples", 100))
    planes = int(block.get("planes_per_point", 10))
    chart = int(block.get("chart", 0))
    tol = config.tolerances
    rng = np.random.default_rng(config.seed)
    points = manifold.sample_points(samples, rng)
    k = constant_curvature_of(manifold, manifold_block)

    rows = []
    for point in points:
        bundle = curvature_bundle(manifold, point, chart)
        row = {f"x{i}": float(point[i]) for i in range(manifold.dim)}
        row.update(curvature_symmetry_defects(bundle.riemann))
        row["scalar"] = float(bundle.scalar)
        if k is not None and manifold.dim >= 2:
            xs, ys = rng.normal(size=(planes, manifold.dim)), rng.normal(size=(planes, manifold.dim))
            values = sectional_samples(bundle, xs, ys)
            finite = np.isfinite(values)
            row["sectional_error"] = float(np.max(np.abs(values[finite] - k))) if finite.any() else np.nan
            row["ricci_error"] = operator_norm(bundle.ricci - (manifold.dim - 1) * k * bundle.metric, bundle.metric)
        rows.append(row)
    table = pd.DataFrame(rows)

    outcome = ExperimentOutcome(tables={"curvature": table})
    defects = ["antisymmetry_first_pair", "antisymmetry_second_pair", "pair_symmetry", "first_bianchi"]
    outcome.checks.append(at_most("curvature.symmetry_defect", float(table[defects].to_numpy().max()),
                                  tol.get("curvature.symmetry", 1e-9)))
    if "sectional_error" in table and table["sectional_error"].isna().all():
        outcome.checks.append(not_applicable("curvature.sectional_oracle", "every sampled plane was degenerate"))
    elif "sectional_error" in table:
        outcome.checks.append(at_most("curvature.sectional_oracle", float(table["sectional_error"].max()),
                                      tol.get("curvature.sectional", 1e-8)))
    if "ricci_error" in table:
        outcome.checks.append(at_most("curvature.ricci_oracle", float(table["ricci_error"].max()),
                                      tol.get("curvature.ricci", 1e-8)))
        outcome.results["constant_curvature"] = k

    if "K" in block:
        report = sec_upper_bound_check(manifold, float(block["K"]), points, planes, seed=config.seed,
                                       tol=tol.get("curvature.sec_bound", 1e-9), chart=chart)
        outcome.checks.append(flag("curvature.sec_upper_bound", report.passed))
        outcome.results["sec_bound"] = asdict(report)

    steps = block.get("fd_steps")
    if steps:
        if k is None:
            raise ConfigError("finite-difference sweeps need a model space with known curvature",
                              field="curvature.fd_steps")
        sweep_points = points[: min(len(points), 10)]
        series = []
        for h in steps:
            fd = manifold.with_derivatives("fd", float(h), float(h))
            series.append((float(h), _sectional_error(fd, sweep_points, k, chart,
                                                      np.random.default_rng(config.seed), planes)))
        _convergence(outcome, config, "curvature", series, "curvature.min_order", "curvature.fd_steps")
    return outcome


# ---------------------------------------------------------------------
# bochner
# ---------------------------------------------------------------------
def _bochner_grid(block, source: ManifoldModel) -> GridSpec:
    resolution = int(block.get("resolution", 8))
    m = source.dim
    if source.kind == ManifoldKind.FLAT_TORUS and "center" not in block:
        return GridSpec.torus(m, resolution)
    spacing = np.full(m, float(block.get("spacing", 0.05)))
    center = np.asarray(block.get("center", np.zeros(m)), dtype=float).reshape(m)
    return GridSpec(origin=center - spacing * (resolution - 1) / 2.0, spacing=spacing, shape=(resolution,) * m)


def run_bochner(config: ExperimentConfig) -> ExperimentOutcome:
    block = config.block("bochner")
    phi = experiment_map(config)
    K = float(block.get("K", 0.0))
    grid = _bochner_grid(block, phi.source)
    tol = config.tolerances
    harmonic_tol = tol.get("bochner.harmonic", float(block.get("harmonic_tol", 1e-6)))
    outcome = ExperimentOutcome()

    try:
        result = bochner_residual(phi, grid, K, harmonic_tol)
    except HarmonicityPreconditionError as e:
        outcome.checks.append(at_most("bochner.harmonic", e.sup_tension, e.tolerance))
        outcome.results["sup_tension"] = e.sup_tension
        return outcome

    outcome.tables["bochner"] = result.table
    outcome.checks.append(at_most("bochner.harmonic", result.sup_tension, harmonic_tol))
    outcome.checks.append(at_most("bochner.residual", result.sup_residual, tol.get("bochner.residual", 1e-7)))
    certificate = certify_subharmonic(result)
    outcome.results.update({"sup_residual": result.sup_residual, "sup_tension": result.sup_tension,
                            "K": K, "subharmonic": asdict(certificate)})

    steps = block.get("sweep_steps")
    if steps:
        sweep_tol = tol.get("bochner.sweep_harmonic", 1e-3)
        series = []
        for h in steps:
            fd = phi.with_derivatives("fd", float(h), float(h))
            series.append((float(h), bochner_residual(fd, grid, K, sweep_tol).sup_residual))
        _convergence(outcome, config, "bochner", series, "bochner.min_order", "bochner.sweep_steps")
    return outcome


# ---------------------------------------------------------------------
# lemma
# ---------------------------------------------------------------------
def run_lemma(config: ExperimentConfig) -> ExperimentOutcome:
    block = config.block("lemma")
    tol = config.tolerances
    try:
        m, n = int(block["m"]), int(block["n"])
        Ks = [float(K) for K in block.get("Ks", [0.0, 1.0])]
    except KeyError as e:
        raise ConfigError("missing value", field=f"lemma.{e.args[0]}") from e
    if m < 2 or n < 1:
        raise ConfigError(f"need m >= 2 and n >= 1, got m={m}, n={n}", field="lemma.m")
    samples = int(block.get("samples", 1000))
    if samples <= 0:
        raise ConfigError("must be positive", field="lemma.samples")

    result = run_lemma_campaign(
        m, n, Ks, samples, config.seed,
        pool_size=int(block.get("pool_size", POOL_SIZE)),
        q0_tol=tol.get("lemma.q0", 1e-12),
        q1_tol=tol.get("lemma.q1", 1e-10),
        equality_tol=tol.get("lemma.equality", 1e-8),
    )
    outcome = ExperimentOutcome(tables={"lemma_summary": result.summary})
    for row in result.summary.itertuples(index=False):
        outcome.checks.append(at_most(f"lemma.{row.check}[K={row.K:g}]", row.violations, 0))
    outcome.results.update({"params": result.params, "total_violations": result.total_violations,
                            "witnesses": result.witnesses[:MAX_WITNESSES]})
    return outcome


# ---------------------------------------------------------------------
# flow
# ---------------------------------------------------------------------
def run_flow_experiment(config: ExperimentConfig) -> ExperimentOutcome:
    block = config.block("flow")
    phi = experiment_map(config)
    flow = flow_config(config)
    K = float(block.get("K", 0.0))
    tol = config.tolerances

    result = run_flow(phi, flow)
    verdict = rigidity_diagnostics(result, K, tol=tol.get("flow.verdict", 1e-5))
    final_energy = float(result.trajectory["energy"].iloc[-1])
    outcome = ExperimentOutcome(tables={"trajectory": result.trajectory})
    outcome.checks.append(at_most("flow.sup_tau", result.final_sup_tau, flow.tau_tol))
    outcome.checks.append(flag("flow.energy_monotone", result.energy_monotone))
    outcome.checks.append(at_most("flow.sff_sup", verdict.residuals["sff_sup"], tol.get("flow.sff_sup", 1e-6)))
    if K > 0.0:
        outcome.checks.append(flag("flow.verdict_determinate", verdict.verdict != Verdict.INDETERMINATE))
    if verdict.verdict == Verdict.CONSTANT_MAP and flow.energy_monitor:
        outcome.checks.append(at_most("flow.final_energy", final_energy, tol.get("flow.energy_collapse", 1e-10)))
    elif verdict.verdict == Verdict.CONSTANT_MAP:
        outcome.checks.append(not_applicable("flow.final_energy", "energy monitor disabled"))

    state = result.final_state
    outcome.results.update({
        "converged": result.converged,
        "steps": state.step_count,
        "final_time": state.time,
        "final_energy": final_energy,
        "verdict": verdict_dict(verdict),
        "warnings": result.warnings,
    })
    outcome.artifacts["final_state"] = {
        "grid_shape": list(state.grid.shape),
        "spacing": state.grid.spacing.tolist(),
        "time": state.time,
        "step_count": state.step_count,
        "values": state.values.tolist(),
        "charts": state.charts.tolist(),
    }
    outcome.plots.append(PlotSpec("trajectory", "step", "energy", "energy.svg", "Discrete energy"))
    outcome.plots.append(PlotSpec("trajectory", "step", "sup_tau", "tension.svg", "sup |tau|"))
    return outcome


# ---------------------------------------------------------------------
# prescribe
# ---------------------------------------------------------------------
PRESCRIPTION_CHECKS = ("harmonic_einstein", "conservativity", "rigidity", "prescribed_ricci", "homothety", "hamilton")


def run_prescription(config: ExperimentConfig) -> ExperimentOutcome:
    block = config.block("prescription")
    tol = config.tolerances
    g = build_manifold(config.block("manifold"), "manifold")
    h = build_manifold(config.block("target"), "target") if "target" in config.blocks else g
    phi = (build_map(config.block("map"), g, h, config.block("manifold"), config.block("target"))
           if "map" in config.blocks else identity_map(g, h))
    samples = int(block.get("samples", 16))
    points = g.sample_points(samples, np.random.default_rng(config.seed))

    requested = block.get("checks")
    if requested is None:
        requested = [name for name, key in (("harmonic_einstein", "alpha"), ("conservativity", "alpha"),
                                            ("prescribed_ricci", "c")) if key in block]
    for name in requested:
        if name not in PRESCRIPTION_CHECKS:
            raise ConfigError(f"unknown check {name!r}", field="prescription.checks")

    needs_alpha = {"harmonic_einstein", "conservativity", "rigidity"} & set(requested)
    if needs_alpha and "alpha" not in block:
        raise ConfigError("missing value", field="prescription.alpha")
    if "prescribed_ricci" in requested and "c" not in block:
        raise ConfigError("missing value", field="prescription.c")
    try:
        spec = StructureSpec(phi, float(block["alpha"]), float(block.get("lambda", 0.0)),
                             name=config.name) if needs_alpha else None
    except ValueError as e:
        raise ConfigError(str(e), field="prescription.alpha") from e

    residual_tol = tol.get("prescription.residual", 1e-8)
    outcome = ExperimentOutcome()
    for name in requested:
        if name == "harmonic_einstein":
            report = harmonic_einstein_residual(spec, points)
            outcome.tables["harmonic_einstein"] = report.table
            outcome.checks.append(at_most("prescription.harmonic_einstein", report.sup, residual_tol))
            outcome.results["harmonic_einstein"] = report.as_dict()
        elif name == "conservativity":
            report = conservativity_residual(spec, points)
            outcome.tables["conservativity"] = report.table
            outcome.checks.append(at_most("prescription.conservativity", report.sup, residual_tol))
            outcome.results["conservativity"] = report.as_dict()
        elif name == "rigidity":
            rigidity = harmonic_einstein_rigidity(spec, points, seed=config.seed, tol=residual_tol)
            outcome.checks.append(flag("prescription.rigidity", rigidity.passed))
            outcome.results["rigidity"] = {
                "K": rigidity.K,
                "applicable": rigidity.applicable,
                "lambda_consistent": rigidity.lambda_consistent,
                "audit": {"ricci_min_residual": rigidity.audit.ricci_min_residual,
                          "sec_bound": asdict(rigidity.audit.sec_report), "passed": rigidity.audit.passed},
                "verdict": verdict_dict(rigidity.verdict),
            }
        elif name == "prescribed_ricci":
            report = prescribed_ricci_residual(g, h, float(block["c"]), points)
            outcome.tables["prescribed_ricci"] = report.table
            outcome.checks.append(at_most("prescription.prescribed_ricci", report.sup, residual_tol))
            outcome.results["prescribed_ricci"] = report.as_dict()
        elif name == "homothety":
            mu, residual = homothety_fit(g, h, points)
            outcome.checks.append(at_most("prescription.homothety", residual, tol.get("prescription.homothety", 1e-12)))
            outcome.results["homothety"] = {"mu": mu, "residual": residual}
        elif name == "hamilton":
            report = hamilton_corollary_check(g, h, points, seed=config.seed, tol=residual_tol)
            outcome.checks.append(flag("prescription.hamilton", report.passed))
            outcome.results["hamilton"] = {
                "hypotheses_hold": report.hypotheses_hold, "homothetic": report.homothetic, "mu": report.mu,
                "homothety_residual": report.homothety_residual, "sec_deviation": report.sec_deviation,
                "ricci_residual": report.ricci_residual.sup,
            }
    return outcome


RUNNERS: Dict[str, Callable[[ExperimentConfig], ExperimentOutcome]] = {
    "curvature": run_curvature,
    "bochner": run_bochner,
    "lemma": run_lemma,
    "flow": run_flow_experiment,
    "prescribe": run_prescription,
}


def run_experiment(config: ExperimentConfig) -> ExperimentOutcome:
    logger.info(f"Running {config.kind} experiment '{config.name}'")
    return RUNNERS[config.kind](config)
