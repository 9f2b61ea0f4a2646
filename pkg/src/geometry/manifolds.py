"""
manifolds.py
------------
Chart-based model Riemannian manifolds.

Supports:
 - flat tori R^m / Z^m with a lattice basis (metric B^T B in lattice coordinates)
 - round spheres S^m(r) with two antipodal stereographic charts
 - Poincare-ball models of hyperbolic space with curvature -1/r^2
 - Riemannian products and user supplied metric callbacks
 - metric rescaling (c*g) and constant non-conformal deformations
 - analytic metric derivatives with a central finite-difference fallback
"""

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np
from scipy import linalg as sla

from geometry.linalg import symmetrize
from utils.errors import ConditioningError, DomainError
from utils.logger_config import get_logger

logger = get_logger(__name__)

MetricFn = Callable[[np.ndarray], np.ndarray]
Sampler = Callable[[np.random.Generator, int], np.ndarray]

# Central-difference steps for first and second metric derivatives.
FD_STEP1 = 1e-5
FD_STEP2 = 1e-4

# Sphere points with |x| beyond this multiple of r are re-expressed in the antipodal chart.
SPHERE_CHART_LIMIT = 1.5


class ManifoldKind(str, Enum):
    FLAT_TORUS = "flat_torus"
    ROUND_SPHERE = "round_sphere"
    HYPERBOLIC_DISK = "hyperbolic_disk"
    PRODUCT = "product"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class Chart:
    """One coordinate chart: a domain test, the metric field and optional analytic derivatives."""

    name: str
    dim: int
    metric: MetricFn
    contains: Callable[[np.ndarray], bool]
    metric_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None  # [k, i, j] = d_k g_ij
    metric_hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None  # [k, l, i, j] = d_k d_l g_ij
    # Conformally flat charts, g = exp(2f) * conformal_base: vectorized gradient of f.
    log_factor_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    conformal_base: Optional[np.ndarray] = None
    flat: bool = False
    period: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class ManifoldModel:
    """An immutable model manifold; safe to share between workers."""

    dim: int
    kind: ManifoldKind
    charts: Tuple[Chart, ...]
    name: str
    sampler: Sampler
    params: Mapping[str, object] = field(default_factory=dict)
    transitions: Mapping[Tuple[int, int], Callable[[np.ndarray], np.ndarray]] = field(default_factory=dict)
    factors: Tuple["ManifoldModel", ...] = ()
    derivatives: str = "analytic"
    fd_step1: float = FD_STEP1
    fd_step2: float = FD_STEP2

    @property
    def is_flat(self) -> bool:
        return all(chart.flat for chart in self.charts)

    def chart(self, index: int = 0) -> Chart:
        try:
            return self.charts[index]
        except IndexError as e:
            raise DomainError(f"{self.name} has no chart {index}") from e

    def with_derivatives(self, mode: str, fd_step1: Optional[float] = None,
                         fd_step2: Optional[float] = None) -> "ManifoldModel":
        """Copy of the model using 'analytic' or 'fd' metric derivatives."""
        if mode not in ("analytic", "fd"):
            raise ValueError(f"Unknown derivative mode: {mode}")
        return dataclasses.replace(
            self,
            derivatives=mode,
            fd_step1=self.fd_step1 if fd_step1 is None else fd_step1,
            fd_step2=self.fd_step2 if fd_step2 is None else fd_step2,
        )

    def transition(self, point: np.ndarray, source: int, target: int) -> np.ndarray:
        """Coordinates of point (given in chart source) in chart target."""
        if source == target:
            return np.asarray(point, dtype=float)
        if (source, target) not in self.transitions:
            raise DomainError(f"{self.name}: no transition from chart {source} to chart {target}")
        return self.transitions[(source, target)](np.asarray(point, dtype=float))

    def locate(self, point: np.ndarray, chart: int = 0) -> Tuple[int, np.ndarray]:
        """Return (chart, coordinates) with the point inside that chart's domain."""
        point = np.asarray(point, dtype=float)
        if self.chart(chart).contains(point):
            return chart, point
        for (source, target), fn in self.transitions.items():
            if source != chart:
                continue
            moved = fn(point)
            if np.all(np.isfinite(moved)) and self.charts[target].contains(moved):
                logger.debug(f"{self.name}: point moved from chart {source} to chart {target}")
                return target, moved
        raise DomainError(f"Point {point.tolist()} lies outside every chart of {self.name}")

    def sample_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """count points in chart 0, shape (count, dim)."""
        return np.asarray(self.sampler(rng, count), dtype=float).reshape(count, self.dim)


# ---------------------------------------------------------------------
# Builtin models
# ---------------------------------------------------------------------
def flat_torus(dim: int = 2, lattice: Optional[np.ndarray] = None) -> ManifoldModel:
    """R^m / Z^m in lattice coordinates; the metric is B^T B for lattice basis columns B."""
    basis = np.eye(dim) if lattice is None else np.asarray(lattice, dtype=float)
    if basis.shape != (dim, dim):
        raise ValueError(f"Lattice basis must be {dim}x{dim}, got {basis.shape}")
    gram = symmetrize(basis.T @ basis)
    if np.linalg.eigvalsh(gram)[0] <= 0.0:
        raise ValueError("Lattice basis is singular")

    chart = Chart(
        name="lattice",
        dim=dim,
        metric=lambda x: gram.copy(),
        contains=lambda x: bool(np.all(np.isfinite(x))),
        metric_jacobian=lambda x: np.zeros((dim, dim, dim)),
        metric_hessian=lambda x: np.zeros((dim, dim, dim, dim)),
        log_factor_gradient=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        conformal_base=gram,
        flat=True,
        period=np.ones(dim),
    )
    return ManifoldModel(
        dim=dim,
        kind=ManifoldKind.FLAT_TORUS,
        charts=(chart,),
        name=f"T{dim}",
        sampler=lambda rng, n: rng.uniform(0.0, 1.0, size=(n, dim)),
        params={"lattice": basis},
    )


def _conformal_ball_chart(name: str, dim: int, radius: float, sign: float,
                          contains: Callable[[np.ndarray], bool]) -> Chart:
    """
    Chart with g = lam(x) I, lam = 4 r^4 / (r^2 + s |x|^2)^2.

    s = +1 is stereographic S^m(r) (curvature 1/r^2), s = -1 the ball model of curvature -1/r^2.
    """
    r2, r4 = radius ** 2, radius ** 4

    def u(x):
        return r2 + sign * float(x @ x)

    def lam(x):
        return 4.0 * r4 / u(x) ** 2

    def metric(x):
        return lam(np.asarray(x, dtype=float)) * np.eye(dim)

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        grad = -16.0 * sign * r4 * x / u(x) ** 3
        return np.einsum("k,ij->kij", grad, np.eye(dim))

    def hessian(x):
        x = np.asarray(x, dtype=float)
        uu = u(x)
        second = -16.0 * sign * r4 * np.eye(dim) / uu ** 3 + 96.0 * r4 * np.outer(x, x) / uu ** 4
        return np.einsum("kl,ij->klij", second, np.eye(dim))

    def log_factor_gradient(x):
        x = np.asarray(x, dtype=float)
        return -2.0 * sign * x / (r2 + sign * np.sum(x * x, axis=-1, keepdims=True))

    return Chart(
        name=name,
        dim=dim,
        metric=metric,
        contains=contains,
        metric_jacobian=jacobian,
        metric_hessian=hessian,
        log_factor_gradient=log_factor_gradient,
        conformal_base=np.eye(dim),
    )


def round_sphere(dim: int = 2, radius: float = 1.0) -> ManifoldModel:
    """S^m(r) with charts 0 (projection from the north pole) and 1 (from the south pole)."""
    if radius <= 0.0:
        raise ValueError(f"Sphere radius must be positive, got {radius}")
    limit = SPHERE_CHART_LIMIT * radius

    def contains(x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.isfinite(x)) and np.linalg.norm(x) <= limit)

    def invert(x):
        x = np.asarray(x, dtype=float)
        norm_sq = float(x @ x)
        if norm_sq == 0.0:
            return np.full_like(x, np.inf)
        return radius ** 2 * x / norm_sq

    charts = (
        _conformal_ball_chart("stereographic-north", dim, radius, 1.0, contains),
        _conformal_ball_chart("stereographic-south", dim, radius, 1.0, contains),
    )

    def sampler(rng, n):
        directions = rng.normal(size=(n, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / dim)
        return directions * radii

    return ManifoldModel(
        dim=dim,
        kind=ManifoldKind.ROUND_SPHERE,
        charts=charts,
        name=f"S{dim}({radius:g})",
        sampler=sampler,
        params={"radius": radius},
        transitions={(0, 1): invert, (1, 0): invert},
    )


def hyperbolic_disk(dim: int = 2, radius: float = 1.0) -> ManifoldModel:
    """Ball model of radius r; sectional curvature -1/r^2 everywhere."""
    if radius <= 0.0:
        raise ValueError(f"Curvature scale must be positive, got {radius}")

    def contains(x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.isfinite(x)) and np.linalg.norm(x) < radius)

    def sampler(rng, n):
        directions = rng.normal(size=(n, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = 0.8 * radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / dim)
        return directions * radii

    chart = _conformal_ball_chart("poincare", dim, radius, -1.0, contains)
    return ManifoldModel(
        dim=dim,
        kind=ManifoldKind.HYPERBOLIC_DISK,
        charts=(chart,),
        name=f"H{dim}({radius:g})",
        sampler=sampler,
        params={"radius": radius},
    )


def product(first: ManifoldModel, second: ManifoldModel) -> ManifoldModel:
    """Riemannian product; chart (i, j) of the factors has index i * len(second.charts) + j."""
    m1, m2 = first.dim, second.dim
    dim = m1 + m2
    n2 = len(second.charts)

    def product_chart(c1: Chart, c2: Chart) -> Chart:
        def metric(x):
            return sla.block_diag(c1.metric(x[:m1]), c2.metric(x[m1:]))

        jacobian = hessian = None
        if c1.metric_jacobian is not None and c2.metric_jacobian is not None:
            def jacobian(x):
                out = np.zeros((dim, dim, dim))
                out[:m1, :m1, :m1] = c1.metric_jacobian(x[:m1])
                out[m1:, m1:, m1:] = c2.metric_jacobian(x[m1:])
                return out

        if c1.metric_hessian is not None and c2.metric_hessian is not None:
            def hessian(x):
                out = np.zeros((dim, dim, dim, dim))
                out[:m1, :m1, :m1, :m1] = c1.metric_hessian(x[:m1])
                out[m1:, m1:, m1:, m1:] = c2.metric_hessian(x[m1:])
                return out

        period = None
        if c1.period is not None and c2.period is not None:
            period = np.concatenate([c1.period, c2.period])

        return Chart(
            name=f"{c1.name}x{c2.name}",
            dim=dim,
            metric=metric,
            contains=lambda x: c1.contains(x[:m1]) and c2.contains(x[m1:]),
            metric_jacobian=jacobian,
            metric_hessian=hessian,
            flat=c1.flat and c2.flat,
            period=period,
        )

    charts = tuple(product_chart(c1, c2) for c1 in first.charts for c2 in second.charts)

    def make_transition(a: int, b: int):
        (a1, a2), (b1, b2) = divmod(a, n2), divmod(b, n2)

        def transition(x):
            return np.concatenate([first.transition(x[:m1], a1, b1), second.transition(x[m1:], a2, b2)])

        return transition

    transitions: Dict[Tuple[int, int], Callable] = {}
    for a in range(len(charts)):
        for b in range(len(charts)):
            (a1, a2), (b1, b2) = divmod(a, n2), divmod(b, n2)
            ok1 = a1 == b1 or (a1, b1) in first.transitions
            ok2 = a2 == b2 or (a2, b2) in second.transitions
            if a != b and ok1 and ok2:
                transitions[(a, b)] = make_transition(a, b)

    def sampler(rng, n):
        return np.hstack([first.sample_points(n, rng), second.sample_points(n, rng)])

    return ManifoldModel(
        dim=dim,
        kind=ManifoldKind.PRODUCT,
        charts=charts,
        name=f"{first.name}x{second.name}",
        sampler=sampler,
        params={"factor_dims": (m1, m2)},
        transitions=transitions,
        factors=(first, second),
        derivatives="analytic" if first.derivatives == second.derivatives == "analytic" else "fd",
    )


def custom_manifold(dim: int, metric: MetricFn, name: str = "custom",
                    metric_jacobian: Optional[Callable] = None,
                    metric_hessian: Optional[Callable] = None,
                    contains: Optional[Callable[[np.ndarray], bool]] = None,
                    sampler: Optional[Sampler] = None) -> ManifoldModel:
    """Single-chart model from a metric callback; missing derivatives fall back to finite differences."""
    chart = Chart(
        name=name,
        dim=dim,
        metric=metric,
        contains=contains or (lambda x: bool(np.all(np.isfinite(x)))),
        metric_jacobian=metric_jacobian,
        metric_hessian=metric_hessian,
    )
    analytic = metric_jacobian is not None and metric_hessian is not None
    return ManifoldModel(
        dim=dim,
        kind=ManifoldKind.CUSTOM,
        charts=(chart,),
        name=name,
        sampler=sampler or (lambda rng, n: rng.uniform(-0.5, 0.5, size=(n, dim))),
        derivatives="analytic" if analytic else "fd",
    )


# ---------------------------------------------------------------------
# Metric transformations
# ---------------------------------------------------------------------
def _scaled_chart(chart: Chart, c: float) -> Chart:
    return dataclasses.replace(
        chart,
        metric=lambda x: c * chart.metric(x),
        metric_jacobian=None if chart.metric_jacobian is None else (lambda x: c * chart.metric_jacobian(x)),
        metric_hessian=None if chart.metric_hessian is None else (lambda x: c * chart.metric_hessian(x)),
        conformal_base=None if chart.conformal_base is None else c * chart.conformal_base,
    )


def scale_metric(manifold: ManifoldModel, c: float) -> ManifoldModel:
    """The same charts carrying the metric c*g (Christoffel symbols unchanged, sectional values / c)."""
    if c <= 0.0:
        raise ValueError(f"Metric scale must be positive, got {c}")
    params = dict(manifold.params)
    params["scale"] = c * float(params.get("scale", 1.0))
    return dataclasses.replace(
        manifold,
        charts=tuple(_scaled_chart(chart, c) for chart in manifold.charts),
        name=f"{c:g}*{manifold.name}",
        params=params,
        factors=tuple(scale_metric(f, c) for f in manifold.factors),
    )


def deform_metric(manifold: ManifoldModel, deformation: np.ndarray) -> ManifoldModel:
    """
    g(x) = h(x) + (tr h(x) / m) E for a constant symmetric E, in chart 0 only.

    For a conformal chart h = lam * G0 this stays conformal to the constant G0 + (tr G0 / m) E,
    but g is no longer a multiple of h when E is not a multiple of the identity.
    """
    base = manifold.chart(0)
    m = manifold.dim
    E = symmetrize(np.asarray(deformation, dtype=float))
    if E.shape != (m, m):
        raise ValueError(f"Deformation must be {m}x{m}, got {E.shape}")

    def metric(x):
        h = base.metric(x)
        return h + np.trace(h) / m * E

    jacobian = hessian = None
    if base.metric_jacobian is not None:
        def jacobian(x):
            dh = base.metric_jacobian(x)
            return dh + np.einsum("kii->k", dh)[:, None, None] / m * E

    if base.metric_hessian is not None:
        def hessian(x):
            d2h = base.metric_hessian(x)
            return d2h + np.einsum("klii->kl", d2h)[:, :, None, None] / m * E

    conformal_base = None
    if base.conformal_base is not None:
        conformal_base = base.conformal_base + np.trace(base.conformal_base) / m * E

    chart = dataclasses.replace(
        base,
        name=f"{base.name}-deformed",
        metric=metric,
        metric_jacobian=jacobian,
        metric_hessian=hessian,
        conformal_base=conformal_base,
        log_factor_gradient=base.log_factor_gradient if conformal_base is not None else None,
        flat=base.flat,
    )
    params = dict(manifold.params)
    params["deformation"] = E
    return dataclasses.replace(
        manifold,
        kind=ManifoldKind.CUSTOM,
        charts=(chart,),
        name=f"deformed({manifold.name})",
        params=params,
        transitions={},
        factors=(),
    )


# ---------------------------------------------------------------------
# Metric evaluation
# ---------------------------------------------------------------------
def metric_at(manifold: ManifoldModel, point: np.ndarray, chart: int = 0) -> np.ndarray:
    """Symmetric positive definite metric matrix at a chart point."""
    point = np.asarray(point, dtype=float)
    c = manifold.chart(chart)
    if point.shape != (manifold.dim,):
        raise DomainError(f"Expected a point of dimension {manifold.dim}, got shape {point.shape}")
    if not c.contains(point):
        raise DomainError(f"Point {point.tolist()} lies outside chart '{c.name}' of {manifold.name}")
    g = symmetrize(np.asarray(c.metric(point), dtype=float))
    if np.linalg.eigvalsh(g)[0] <= 0.0:
        raise ConditioningError(f"Metric of {manifold.name} is not positive definite at {point.tolist()}")
    return g


def _fd_jacobian(metric: MetricFn, x: np.ndarray, step: float) -> np.ndarray:
    m = x.size
    out = np.empty((m, m, m))
    for k in range(m):
        e = np.zeros(m)
        e[k] = step
        out[k] = (metric(x + e) - metric(x - e)) / (2.0 * step)
    return out


def _fd_hessian(metric: MetricFn, x: np.ndarray, step: float) -> np.ndarray:
    m = x.size
    out = np.empty((m, m, m, m))
    center = metric(x)
    for k in range(m):
        ek = np.zeros(m)
        ek[k] = step
        out[k, k] = (metric(x + ek) - 2.0 * center + metric(x - ek)) / step ** 2
        for l in range(k + 1, m):
            el = np.zeros(m)
            el[l] = step
            mixed = (metric(x + ek + el) - metric(x + ek - el)
                     - metric(x - ek + el) + metric(x - ek - el)) / (4.0 * step ** 2)
            out[k, l] = mixed
            out[l, k] = mixed
    return out


def _chart_metric(manifold: ManifoldModel, chart: int) -> MetricFn:
    c = manifold.chart(chart)
    return lambda x: symmetrize(np.asarray(c.metric(x), dtype=float))


def metric_jacobian_at(manifold: ManifoldModel, point: np.ndarray, chart: int = 0) -> np.ndarray:
    """dg[k, i, j] = d_k g_ij; analytic when preferred and available, central differences otherwise."""
    point = np.asarray(point, dtype=float)
    c = manifold.chart(chart)
    if manifold.derivatives == "analytic" and c.metric_jacobian is not None:
        dg = np.asarray(c.metric_jacobian(point), dtype=float)
    else:
        dg = _fd_jacobian(_chart_metric(manifold, chart), point, manifold.fd_step1)
    return 0.5 * (dg + dg.transpose(0, 2, 1))


def metric_hessian_at(manifold: ManifoldModel, point: np.ndarray, chart: int = 0) -> np.ndarray:
    """d2g[k, l, i, j] = d_k d_l g_ij, symmetric in (k, l) and (i, j)."""
    point = np.asarray(point, dtype=float)
    c = manifold.chart(chart)
    if manifold.derivatives == "analytic" and c.metric_hessian is not None:
        d2g = np.asarray(c.metric_hessian(point), dtype=float)
    else:
        d2g = _fd_hessian(_chart_metric(manifold, chart), point, manifold.fd_step2)
    d2g = 0.5 * (d2g + d2g.transpose(1, 0, 2, 3))
    return 0.5 * (d2g + d2g.transpose(0, 1, 3, 2))


def metric_derivatives(manifold: ManifoldModel, point: np.ndarray,
                       chart: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """(dg, d2g) at a chart point."""
    return metric_jacobian_at(manifold, point, chart), metric_hessian_at(manifold, point, chart)
