"""
rigidity.py
-----------
Rigidity diagnostics for (approximately) harmonic maps with Ric_g >= (m-1) K phi*h and
sec_h <= K.

A map passing the hypothesis audit with K > 0 should be either constant or a homothetic
immersion phi*h = mu g with mu = |dphi|^2 / m, and then the source has constant curvature
mu K. With K = 0 the same diagnostics report the weaker conclusion: phi is totally
geodesic with constant energy density and constant rank.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Union

import numpy as np

from flow.heat_flow import FlowResult
from flow.state import FlowState, source_metric, state_fields
from geometry.curvature import curvature_bundle, sec_upper_bound_check, sectional_samples, SecBoundReport
from geometry.linalg import operator_norm, orthonormal_differential
from maps.calculus import differential, energy_density, pullback_metric, ricci_lower_bound_residual, \
    second_fundamental_form, target_metric
from maps.models import MapModel
from utils.logger_config import get_logger

logger = get_logger(__name__)

VERDICT_TOL_FLOW = 1e-5
VERDICT_TOL_ANALYTIC = 1e-8
RANK_TOL = 1e-8
DEFAULT_SAMPLES = 16
PLANES_PER_POINT = 20


class Verdict(str, Enum):
    CONSTANT_MAP = "ConstantMap"
    HOMOTHETIC_IMMERSION = "HomotheticImmersion"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class RigidityVerdict:
    verdict: Verdict
    mu: Optional[float]
    residuals: Dict[str, float]
    totally_geodesic: bool
    rank: Optional[int]
    criteria: str
    tolerance: float
    K: float


@dataclass(frozen=True)
class HypothesisAudit:
    K: float
    ricci_min_residual: float
    sec_report: SecBoundReport
    tolerance: float
    ricci_passed: bool
    passed: bool

    @property
    def theorem_applicable(self) -> bool:
        return self.passed and self.K > 0.0


@dataclass(frozen=True, eq=False)
class _Samples:
    """Per-point first- and second-order data gathered from a map or a flow state."""

    dphi_norm: np.ndarray  # largest singular value in orthonormal frames
    energy: np.ndarray
    sff_norm: np.ndarray
    pullback: np.ndarray  # (N, m, m)
    metric: np.ndarray  # (N, m, m)
    ranks: np.ndarray
    source_sectional: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _orthonormal_singular_values(dphi: np.ndarray, g: np.ndarray, h: np.ndarray) -> np.ndarray:
    return np.linalg.svd(orthonormal_differential(dphi, g, h), compute_uv=False)


def _rank(singular: np.ndarray, rel_tol: float = RANK_TOL) -> int:
    if singular.size == 0 or singular[0] == 0.0:
        return 0
    return int(np.sum(singular > rel_tol * singular[0]))


def _map_samples(phi: MapModel, points: np.ndarray, seed: int) -> _Samples:
    rng = np.random.default_rng(seed)
    norms, energies, sffs, pullbacks, metrics, ranks, sections = [], [], [], [], [], [], []
    for point in points:
        bundle = curvature_bundle(phi.source, point, phi.source_chart)
        singular = _orthonormal_singular_values(differential(phi, point), bundle.metric, target_metric(phi, point))
        norms.append(float(singular[0]) if singular.size else 0.0)
        ranks.append(_rank(singular))
        energies.append(energy_density(phi, point))
        sffs.append(np.sqrt(max(second_fundamental_form(phi, point).norm_sq, 0.0)))
        pullbacks.append(pullback_metric(phi, point))
        metrics.append(bundle.metric)
        if phi.source.dim >= 2:
            xs = rng.normal(size=(PLANES_PER_POINT, phi.source.dim))
            ys = rng.normal(size=(PLANES_PER_POINT, phi.source.dim))
            values = sectional_samples(bundle, xs, ys)
            sections.extend(values[np.isfinite(values)].tolist())
    return _Samples(np.array(norms), np.array(energies), np.array(sffs), np.array(pullbacks),
                    np.array(metrics), np.array(ranks), np.array(sections))


def _state_samples(state: FlowState) -> _Samples:
    fields = state_fields(state)
    m = state.grid.dim
    G = source_metric(state.source)
    pullback = fields["pullback"].reshape(-1, m, m)
    # Largest eigenvalue of phi*h against g is the squared largest singular value.
    Ginv = np.linalg.inv(G)
    eig = np.array([np.sort(np.linalg.eigvals(Ginv @ P).real)[::-1] for P in pullback])
    eig = np.maximum(eig, 0.0)
    singular = np.sqrt(eig)
    ranks = np.array([_rank(s) for s in singular])
    return _Samples(
        dphi_norm=singular[:, 0],
        energy=fields["energy"].reshape(-1),
        sff_norm=np.sqrt(np.maximum(fields["sff_norm_sq"].reshape(-1), 0.0)),
        pullback=pullback,
        metric=np.broadcast_to(G, pullback.shape),
        ranks=ranks,
        # Flat torus sources: every sectional value vanishes.
        source_sectional=np.zeros(1),
    )


def _subject_samples(subject, sample_points, seed: int):
    if isinstance(subject, FlowResult):
        subject = subject.final_state
    if isinstance(subject, FlowState):
        return _state_samples(subject), subject.source.dim, f"flow state at t={subject.time:.4g}"
    points = _sample_points(subject, sample_points, seed)
    return _map_samples(subject, points, seed), subject.source.dim, subject.name


def _sample_points(phi: MapModel, sample_points, seed: int) -> np.ndarray:
    if sample_points is None:
        sample_points = DEFAULT_SAMPLES
    if isinstance(sample_points, (int, np.integer)):
        rng = np.random.default_rng(seed)
        return phi.source.sample_points(int(sample_points), rng)
    return np.atleast_2d(np.asarray(sample_points, dtype=float))


def rigidity_diagnostics(subject: Union[MapModel, FlowState, FlowResult], K: float,
                         sample_points=None, tol: Optional[float] = None, seed: int = 0) -> RigidityVerdict:
    """
    Constant map, homothetic immersion or indeterminate, with the residuals behind the call.

    The default tolerance is 1e-8 for analytic maps and 1e-5 for flow outputs.
    """
    is_flow = isinstance(subject, (FlowState, FlowResult))
    tol = (VERDICT_TOL_FLOW if is_flow else VERDICT_TOL_ANALYTIC) if tol is None else tol
    samples, m, label = _subject_samples(subject, sample_points, seed)

    dphi_sup = float(np.max(samples.dphi_norm))
    sff_sup = float(np.max(samples.sff_norm))
    mu = float(np.mean(samples.energy)) / m
    energy_variation = float(np.max(samples.energy) - np.min(samples.energy))
    conformal = max(operator_norm(P - mu * g, g) for P, g in zip(samples.pullback, samples.metric))
    kg_check = float(np.max(np.abs(samples.source_sectional - mu * K))) if samples.source_sectional.size else 0.0
    residuals = {
        "dphi_sup": dphi_sup,
        "sff_sup": sff_sup,
        "energy_variation": energy_variation,
        "conformal_residual": float(conformal),
        "kg_check": kg_check,
    }
    ranks = np.unique(samples.ranks)
    rank = int(ranks[0]) if ranks.size == 1 else None
    totally_geodesic = sff_sup <= tol
    criteria = "homothety" if K > 0.0 else "eells_sampson"

    if dphi_sup <= tol:
        verdict, mu_out = Verdict.CONSTANT_MAP, 0.0
    elif sff_sup <= tol and energy_variation <= tol and conformal <= tol:
        verdict, mu_out = Verdict.HOMOTHETIC_IMMERSION, mu
    else:
        verdict, mu_out = Verdict.INDETERMINATE, None

    if criteria == "eells_sampson":
        logger.info(f"{label}: K={K:g} criteria, totally geodesic={totally_geodesic}, rank={rank}, "
                    f"energy variation {energy_variation:.3e}")
    if verdict == Verdict.INDETERMINATE and K > 0.0:
        logger.warning(f"{label}: rigidity verdict indeterminate at tol {tol:.1e} ({residuals})")
    else:
        logger.info(f"{label}: verdict {verdict.value}, mu={mu_out}")
    return RigidityVerdict(verdict=verdict, mu=mu_out, residuals=residuals, totally_geodesic=totally_geodesic,
                           rank=rank, criteria=criteria, tolerance=tol, K=float(K))


def hypothesis_audit(phi: MapModel, K: float, samples: int = DEFAULT_SAMPLES,
                     planes_per_point: int = PLANES_PER_POINT, seed: int = 0,
                     tol: float = VERDICT_TOL_ANALYTIC) -> HypothesisAudit:
    """Joint check of Ric_g >= (m-1) K phi*h on the source and sec_h <= K on the target."""
    points = _sample_points(phi, samples, seed)
    ricci_min = min(ricci_lower_bound_residual(phi, p, K) for p in points)
    sec_report = sec_upper_bound_check(phi.target, K, samples, planes_per_point, seed=seed, tol=tol,
                                       chart=phi.target_chart)
    ricci_passed = bool(ricci_min >= -tol)
    passed = ricci_passed and sec_report.passed
    logger.info(f"Hypothesis audit for {phi.name} at K={K:g}: min Ricci residual {ricci_min:.3e}, "
                f"max sec {sec_report.max_sectional} -> {'pass' if passed else 'fail'}")
    return HypothesisAudit(K=float(K), ricci_min_residual=float(ricci_min), sec_report=sec_report,
                           tolerance=tol, ricci_passed=ricci_passed, passed=passed)
