"""
residuals.py
------------
Residual checkers for harmonic-Einstein structures and the prescribed Ricci problem.

 - harmonic-Einstein:   Ric_g - alpha phi*h = lambda g, phi harmonic
 - conservativity:      <tau(phi), dphi>_h = 0
 - prescribed Ricci:    Ric_g = c h
 - homothety:           g = mu h

Nothing here solves for a metric; candidate metrics are only verified.
"""

from dataclasses import dataclass
from typing import Dict, List, Union

import numpy as np
import pandas as pd

from flow.rigidity import RigidityVerdict, Verdict, HypothesisAudit, hypothesis_audit, rigidity_diagnostics
from geometry.curvature import SecBoundReport, curvature_bundle, sec_upper_bound_check, sectional_samples
from geometry.linalg import operator_norm
from geometry.manifolds import ManifoldModel, metric_at
from maps.calculus import differential, pullback_metric, target_metric, tension_field, tension_norm
from maps.models import MapModel, identity_map
from utils.logger_config import get_logger

logger = get_logger(__name__)

DEFAULT_SAMPLES = 16
WORST_OFFENDERS = 5
RESIDUAL_TOL = 1e-8
PLANES_PER_POINT = 20

SamplePoints = Union[int, np.ndarray, None]


@dataclass(frozen=True)
class StructureSpec:
    """(g, phi) with constants alpha != 0 and lambda; h is the metric of phi's target."""

    phi: MapModel
    alpha: float
    lam: float = 0.0
    name: str = "structure"

    def __post_init__(self):
        if self.alpha == 0.0:
            raise ValueError("alpha must be non-zero for a harmonic-Einstein structure")

    @property
    def g(self) -> ManifoldModel:
        return self.phi.source

    @property
    def h(self) -> ManifoldModel:
        return self.phi.target

    @classmethod
    def identity(cls, g: ManifoldModel, h: ManifoldModel, alpha: float, lam: float = 0.0,
                 chart: int = 0) -> "StructureSpec":
        """Two metrics on one chart space, compared through the coordinate identity."""
        return cls(phi=identity_map(g, h, chart=chart), alpha=alpha, lam=lam, name=f"{g.name}|{h.name}")


@dataclass(frozen=True, eq=False)
class ResidualReport:
    name: str
    sup: float
    table: pd.DataFrame  # x0.., residual
    norm: str

    def worst(self, count: int = WORST_OFFENDERS) -> List[dict]:
        """The largest per-point residuals, largest first."""
        return self.table.nlargest(count, "residual").to_dict(orient="records")

    def as_dict(self) -> Dict[str, object]:
        return {"name": self.name, "sup": self.sup, "norm": self.norm, "worst": self.worst()}


def _points(manifold: ManifoldModel, sample_points: SamplePoints, seed: int) -> np.ndarray:
    if sample_points is None:
        sample_points = DEFAULT_SAMPLES
    if isinstance(sample_points, (int, np.integer)):
        return manifold.sample_points(int(sample_points), np.random.default_rng(seed))
    return np.atleast_2d(np.asarray(sample_points, dtype=float))


def _report(name: str, points: np.ndarray, values: List[float], norm: str) -> ResidualReport:
    table = pd.DataFrame(points, columns=[f"x{k}" for k in range(points.shape[1])])
    table["residual"] = np.asarray(values, dtype=float)
    sup = float(table["residual"].max()) if len(table) else 0.0
    logger.info(f"{name}: sup residual {sup:.3e} over {len(table)} points ({norm}-norm)")
    return ResidualReport(name=name, sup=sup, table=table, norm=norm)


# ---------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------
def harmonic_einstein_residual(spec: StructureSpec, sample_points: SamplePoints = None,
                               seed: int = 0) -> ResidualReport:
    """sup of the g-operator norm of Ric_g - alpha phi*h - lambda g."""
    points = _points(spec.g, sample_points, seed)
    values = []
    for point in points:
        bundle = curvature_bundle(spec.g, point, spec.phi.source_chart)
        defect = bundle.ricci - spec.alpha * pullback_metric(spec.phi, point) - spec.lam * bundle.metric
        values.append(operator_norm(defect, bundle.metric))
    return _report(f"harmonic_einstein[{spec.name}]", points, values, "g")


def conservativity_residual(spec: StructureSpec, sample_points: SamplePoints = None,
                            seed: int = 0) -> ResidualReport:
    """sup of the g-norm of the covector X_i = h_ab tau^a phi^b_i."""
    phi = spec.phi
    points = _points(spec.g, sample_points, seed)
    values = []
    for point in points:
        X = tension_field(phi, point) @ target_metric(phi, point) @ differential(phi, point)
        ginv = np.linalg.inv(metric_at(phi.source, point, phi.source_chart))
        values.append(float(np.sqrt(max(X @ ginv @ X, 0.0))))
    return _report(f"conservativity[{spec.name}]", points, values, "g")


def prescribed_ricci_residual(g: ManifoldModel, h: ManifoldModel, c: float,
                              sample_points: SamplePoints = None, seed: int = 0,
                              norm: str = "h", chart: int = 0) -> ResidualReport:
    """
    sup of the operator norm of Ric_g - c h.

    The default measures against h, so the residual is unchanged when g is rescaled;
    norm="g" gives the harmonic-Einstein residual of the identity map with alpha = c.
    """
    if c <= 0.0:
        raise ValueError(f"Prescribed Ricci constant must be positive, got {c}")
    if norm not in ("g", "h"):
        raise ValueError(f"Unknown norm: {norm}")
    points = _points(g, sample_points, seed)
    values = []
    for point in points:
        bundle = curvature_bundle(g, point, chart)
        hx = metric_at(h, point, chart)
        values.append(operator_norm(bundle.ricci - c * hx, hx if norm == "h" else bundle.metric))
    return _report(f"prescribed_ricci[{g.name}|{h.name}, c={c:g}]", points, values, norm)


def homothety_fit(g: ManifoldModel, h: ManifoldModel, sample_points: SamplePoints = None,
                  seed: int = 0, chart: int = 0):
    """(mu, residual): mu is the trace-mean of h^-1 g, residual is sup |g - mu h| / |g| against h."""
    points = _points(g, sample_points, seed)
    m = g.dim
    gs = np.array([metric_at(g, p, chart) for p in points])
    hs = np.array([metric_at(h, p, chart) for p in points])
    mu = float(np.mean([np.trace(np.linalg.solve(hx, gx)) / m for gx, hx in zip(gs, hs)]))
    residual = max(operator_norm(gx - mu * hx, hx) / operator_norm(gx, hx) for gx, hx in zip(gs, hs))
    logger.info(f"Homothety fit {g.name} ~ mu {h.name}: mu={mu:.12g}, relative residual {residual:.3e}")
    return mu, float(residual)


# ---------------------------------------------------------------------
# Rigidity statements
# ---------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class HarmonicEinsteinRigidity:
    K: float
    structure_residual: ResidualReport
    sup_tension: float
    audit: HypothesisAudit
    verdict: RigidityVerdict
    lambda_consistent: bool  # the homothetic case forces lambda = 0
    tolerance: float

    @property
    def applicable(self) -> bool:
        return (self.structure_residual.sup <= self.tolerance and self.sup_tension <= self.tolerance
                and self.audit.passed)

    @property
    def passed(self) -> bool:
        """Dichotomy holds: constant, or homothetic with lambda = 0."""
        if not self.applicable:
            return False
        return self.verdict.verdict != Verdict.INDETERMINATE and self.lambda_consistent


def harmonic_einstein_rigidity(spec: StructureSpec, sample_points: SamplePoints = None,
                               seed: int = 0, tol: float = RESIDUAL_TOL) -> HarmonicEinsteinRigidity:
    """
    Audit alpha > 0, lambda >= 0 and sec_h <= alpha/(m-1), then classify phi.

    A harmonic-Einstein structure satisfying these is either constant or a homothetic
    immersion, and in the second case lambda vanishes.
    """
    m = spec.g.dim
    if m < 2:
        raise ValueError("Harmonic-Einstein rigidity needs a source of dimension >= 2")
    if spec.alpha <= 0.0 or spec.lam < 0.0:
        raise ValueError(f"Rigidity needs alpha > 0 and lambda >= 0, got alpha={spec.alpha}, lambda={spec.lam}")
    K = spec.alpha / (m - 1)
    points = _points(spec.g, sample_points, seed)

    structure = harmonic_einstein_residual(spec, points)
    sup_tension = max(tension_norm(spec.phi, p) for p in points)
    audit = hypothesis_audit(spec.phi, K, samples=len(points), seed=seed, tol=tol)
    verdict = rigidity_diagnostics(spec.phi, K, sample_points=points, tol=tol, seed=seed)
    lambda_consistent = verdict.verdict != Verdict.HOMOTHETIC_IMMERSION or abs(spec.lam) <= tol

    result = HarmonicEinsteinRigidity(K=K, structure_residual=structure, sup_tension=float(sup_tension),
                                      audit=audit, verdict=verdict, lambda_consistent=lambda_consistent,
                                      tolerance=tol)
    if not result.applicable:
        logger.warning(f"{spec.name}: hypotheses not met (structure {structure.sup:.3e}, "
                       f"tension {sup_tension:.3e}, audit {'pass' if audit.passed else 'fail'})")
    logger.info(f"{spec.name}: verdict {verdict.verdict.value}, lambda consistent={lambda_consistent}")
    return result


@dataclass(frozen=True, eq=False)
class HamiltonCorollaryReport:
    ricci_residual: ResidualReport
    sec_report: SecBoundReport
    mu: float
    homothety_residual: float
    sec_deviation: float  # sup |sec_h - 1| over sampled planes
    tolerance: float

    @property
    def hypotheses_hold(self) -> bool:
        return self.ricci_residual.sup <= self.tolerance and self.sec_report.passed

    @property
    def homothetic(self) -> bool:
        return self.homothety_residual <= self.tolerance

    @property
    def passed(self) -> bool:
        """Hypotheses imply homothety and sec_h == 1; vacuously true when they fail."""
        if not self.hypotheses_hold:
            return True
        return self.homothetic and self.sec_deviation <= self.tolerance


def hamilton_corollary_check(g: ManifoldModel, h: ManifoldModel, sample_points: SamplePoints = None,
                             seed: int = 0, tol: float = RESIDUAL_TOL,
                             planes_per_point: int = PLANES_PER_POINT) -> HamiltonCorollaryReport:
    """Ric_g = (m-1) h with sec_h <= 1 should force g homothetic to h and sec_h == 1."""
    m = g.dim
    points = _points(g, sample_points, seed)
    ricci_residual = prescribed_ricci_residual(g, h, float(m - 1), points)
    sec_report = sec_upper_bound_check(h, 1.0, points, planes_per_point, seed=seed, tol=tol)
    mu, homothety_residual = homothety_fit(g, h, points)

    rng = np.random.default_rng(seed)
    deviation = 0.0
    for point in points:
        xs, ys = rng.normal(size=(planes_per_point, m)), rng.normal(size=(planes_per_point, m))
        values = sectional_samples(curvature_bundle(h, point), xs, ys)
        values = values[np.isfinite(values)]
        if values.size:
            deviation = max(deviation, float(np.max(np.abs(values - 1.0))))

    report = HamiltonCorollaryReport(ricci_residual=ricci_residual, sec_report=sec_report, mu=mu,
                                     homothety_residual=homothety_residual, sec_deviation=deviation,
                                     tolerance=tol)
    logger.info(f"Ric_g = (m-1) h check for {g.name}: hypotheses {report.hypotheses_hold}, "
                f"homothetic {report.homothetic} (mu={mu:.6g}), sup|sec_h - 1| {deviation:.3e}")
    return report
