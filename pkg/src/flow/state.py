"""
state.py
--------
Discrete maps from a flat torus into a model target, stored node by node on a periodic grid.

Torus targets keep the full lift in lattice coordinates: the node values equal
linear_part @ x plus a periodic part, and stencils across the cell boundary add the
matching lattice translation. Sphere targets keep one stereographic chart index per node;
stencils convert neighbours into the chart of the centre node before differencing.
"""

import dataclasses
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from bochner.grid import GridSpec
from geometry.curvature import christoffel_batch
from geometry.manifolds import SPHERE_CHART_LIMIT, ManifoldKind, ManifoldModel
from maps.models import MapModel
from utils.errors import ConfigError, DomainError
from utils.logger_config import get_logger

logger = get_logger(__name__)

# Explicit Euler is stable for dt <= STABILITY_CONSTANT * h^2 on two-dimensional grids.
STABILITY_CONSTANT = 0.2
FLOW_TARGETS = (ManifoldKind.FLAT_TORUS, ManifoldKind.ROUND_SPHERE, ManifoldKind.HYPERBOLIC_DISK)


@dataclass(frozen=True)
class FlowConfig:
    dt: float
    max_steps: int = 10_000
    tau_tol: float = 1e-8
    energy_monitor: bool = True
    seed: int = 0
    resolution: int = 32
    perturbation: float = 0.0

    def validate(self) -> None:
        if not np.isfinite(self.dt) or self.dt <= 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}", field="flow.dt")
        if self.max_steps < 0:
            raise ConfigError(f"max_steps must be >= 0, got {self.max_steps}", field="flow.max_steps")
        if self.tau_tol <= 0.0:
            raise ConfigError(f"tau_tol must be positive, got {self.tau_tol}", field="flow.tau_tol")
        if self.resolution < 3:
            raise ConfigError(f"resolution must be >= 3, got {self.resolution}", field="flow.resolution")
        if self.perturbation < 0.0:
            raise ConfigError("perturbation must be non-negative", field="flow.perturbation")


@dataclass(frozen=True, eq=False)
class FlowState:
    grid: GridSpec
    values: np.ndarray  # (*grid.shape, n) target chart coordinates
    charts: np.ndarray  # (*grid.shape,) target chart index per node
    source: ManifoldModel
    target: ManifoldModel
    linear_part: Optional[np.ndarray] = None
    time: float = 0.0
    step_count: int = 0

    def advance(self, values: np.ndarray, charts: np.ndarray, dt: float) -> "FlowState":
        return dataclasses.replace(self, values=values, charts=charts, time=self.time + dt,
                                   step_count=self.step_count + 1)


def source_metric(source: ManifoldModel) -> np.ndarray:
    """Constant lattice metric of a flat torus source."""
    return np.asarray(source.chart(0).metric(np.zeros(source.dim)), dtype=float)


def stability_bound(grid: GridSpec, source: ManifoldModel) -> float:
    """Largest stable dt: STABILITY_CONSTANT * h_phys^2, scaled by 2/m beyond two dimensions."""
    G = source_metric(source)
    h_phys = float(np.min(grid.spacing)) * np.sqrt(float(np.linalg.eigvalsh(G)[0]))
    return STABILITY_CONSTANT * h_phys ** 2 * min(1.0, 2.0 / grid.dim)


def check_flow_pair(source: ManifoldModel, target: ManifoldModel) -> None:
    if source.kind != ManifoldKind.FLAT_TORUS:
        raise ConfigError(f"Flow sources must be flat tori, got {source.kind.value}", field="manifold.kind")
    if target.kind not in FLOW_TARGETS:
        raise ConfigError(f"Unsupported flow target {target.kind.value}", field="target.kind")


def initial_state(phi: MapModel, config: FlowConfig) -> FlowState:
    """Sample phi on the periodic grid, add the seeded perturbation and place every node in a chart."""
    config.validate()
    check_flow_pair(phi.source, phi.target)
    grid = GridSpec.torus(phi.source.dim, config.resolution)
    if config.dt > stability_bound(grid, phi.source):
        raise ConfigError(f"dt={config.dt:g} exceeds the stability bound "
                          f"{stability_bound(grid, phi.source):.3e}", field="flow.dt")

    points = grid.points()
    flat = points.reshape(-1, grid.dim)
    values = np.stack([np.asarray(phi.chart_map(p), dtype=float).reshape(phi.target.dim) for p in flat])
    if config.perturbation > 0.0:
        rng = np.random.default_rng(config.seed)
        values = values + config.perturbation * rng.normal(size=values.shape)
    charts = np.full(len(values), phi.target_chart, dtype=int)

    linear_part = None
    if phi.target.kind == ManifoldKind.FLAT_TORUS:
        if phi.linear_part is None:
            raise ConfigError("Torus-valued flow maps need a linear part", field="map.matrix")
        linear_part = np.asarray(phi.linear_part, dtype=float)

    values, charts = place_in_charts(phi.target, values, charts)
    logger.info(f"Flow initial state: {phi.name} on grid {grid.shape}, dt={config.dt:g}")
    return FlowState(
        grid=grid,
        values=values.reshape(grid.shape + (phi.target.dim,)),
        charts=charts.reshape(grid.shape),
        source=phi.source,
        target=phi.target,
        linear_part=linear_part,
    )


# ---------------------------------------------------------------------
# Chart management
# ---------------------------------------------------------------------
def _invert(values: np.ndarray, radius: float) -> np.ndarray:
    norm_sq = np.sum(values * values, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        return radius ** 2 * values / norm_sq


def place_in_charts(target: ManifoldModel, values: np.ndarray, charts: np.ndarray):
    """Swap sphere nodes beyond SPHERE_CHART_LIMIT * r into the antipodal chart; DomainError if unplaceable."""
    values = np.array(values, dtype=float)
    charts = np.array(charts, dtype=int)
    if target.kind == ManifoldKind.ROUND_SPHERE:
        radius = float(target.params["radius"])
        far = np.linalg.norm(values, axis=-1) > SPHERE_CHART_LIMIT * radius
        if np.any(far):
            values[far] = _invert(values[far], radius)
            charts[far] = 1 - charts[far]
            logger.debug(f"{int(np.sum(far))} nodes swapped stereographic chart")
        inside = np.all(np.isfinite(values), axis=-1) & (np.linalg.norm(values, axis=-1) <= SPHERE_CHART_LIMIT * radius)
    elif target.kind == ManifoldKind.HYPERBOLIC_DISK:
        inside = np.all(np.isfinite(values), axis=-1) & (np.linalg.norm(values, axis=-1) < float(target.params["radius"]))
    else:
        inside = np.all(np.isfinite(values), axis=-1)
    if not np.all(inside):
        raise DomainError(f"{int(np.sum(~inside))} nodes lie outside every chart of {target.name}")
    return values, charts


def _to_center_chart(neighbour: np.ndarray, neighbour_charts: np.ndarray, center_charts: np.ndarray,
                     target: ManifoldModel) -> np.ndarray:
    if target.kind != ManifoldKind.ROUND_SPHERE:
        return neighbour
    mismatch = neighbour_charts != center_charts
    if not np.any(mismatch):
        return neighbour
    out = neighbour.copy()
    out[mismatch] = _invert(neighbour[mismatch], float(target.params["radius"]))
    return out


# ---------------------------------------------------------------------
# Stencils
# ---------------------------------------------------------------------
def padded(state: FlowState):
    """Node values and charts with one wrapped layer; torus lifts get the lattice translation."""
    values, charts = state.values, state.charts
    if state.linear_part is not None:
        x = state.grid.points()
        periodic = values - np.einsum("am,...m->...a", state.linear_part, x)
        wrapped = np.pad(periodic, [(1, 1)] * state.grid.dim + [(0, 0)], mode="wrap")
        lifted = wrapped + np.einsum("am,...m->...a", state.linear_part, state.grid.points(pad=1))
    else:
        lifted = np.pad(values, [(1, 1)] * state.grid.dim + [(0, 0)], mode="wrap")
    return lifted, np.pad(charts, 1, mode="wrap")


def _neighbour(state: FlowState, pad_values, pad_charts, offsets) -> np.ndarray:
    index = tuple(slice(1 + o, 1 + o + n) for o, n in zip(offsets, state.grid.shape))
    return _to_center_chart(pad_values[index], pad_charts[index], state.charts, state.target)


def central_derivatives(state: FlowState):
    """(dphi [..., n, m], d2phi [..., n, m, m]) by second-order central differences."""
    grid, m = state.grid, state.grid.dim
    s = grid.spacing
    pad_values, pad_charts = padded(state)
    center = state.values
    n = center.shape[-1]
    dphi = np.empty(grid.shape + (n, m))
    d2phi = np.empty(grid.shape + (n, m, m))
    zero = [0] * m
    for i in range(m):
        plus, minus = list(zero), list(zero)
        plus[i], minus[i] = 1, -1
        fp = _neighbour(state, pad_values, pad_charts, plus)
        fm = _neighbour(state, pad_values, pad_charts, minus)
        dphi[..., i] = (fp - fm) / (2.0 * s[i])
        d2phi[..., i, i] = (fp - 2.0 * center + fm) / s[i] ** 2
        for j in range(i + 1, m):
            corners = []
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                off = list(zero)
                off[i], off[j] = si, sj
                corners.append(_neighbour(state, pad_values, pad_charts, off))
            mixed = (corners[0] - corners[1] - corners[2] + corners[3]) / (4.0 * s[i] * s[j])
            d2phi[..., i, j] = mixed
            d2phi[..., j, i] = mixed
    return dphi, d2phi


def forward_differences(state: FlowState) -> np.ndarray:
    """One-sided dphi [..., n, m], the differences whose energy the explicit scheme decreases."""
    grid, m = state.grid, state.grid.dim
    pad_values, pad_charts = padded(state)
    out = np.empty(grid.shape + (state.values.shape[-1], m))
    for i in range(m):
        plus = [0] * m
        plus[i] = 1
        out[..., i] = (_neighbour(state, pad_values, pad_charts, plus) - state.values) / grid.spacing[i]
    return out


def target_metric_field(state: FlowState) -> np.ndarray:
    """h at every node, in the node's own chart."""
    n = state.values.shape[-1]
    target = state.target
    if target.kind == ManifoldKind.FLAT_TORUS:
        return np.broadcast_to(source_metric(target), state.grid.shape + (n, n))
    # Both ball models: lam = scale * 4 r^4 / (r^2 + s |y|^2)^2, identical in every chart.
    radius = float(target.params["radius"])
    sign = 1.0 if target.kind == ManifoldKind.ROUND_SPHERE else -1.0
    scale = float(target.params.get("scale", 1.0))
    norm_sq = np.sum(state.values * state.values, axis=-1)
    lam = scale * 4.0 * radius ** 4 / (radius ** 2 + sign * norm_sq) ** 2
    return lam[..., None, None] * np.eye(n)


def target_christoffel_field(state: FlowState) -> np.ndarray:
    """Gamma^a_bc of the target at every node, in the node's own chart."""
    n = state.values.shape[-1]
    out = np.zeros(state.grid.shape + (n, n, n))
    if state.target.kind == ManifoldKind.FLAT_TORUS:
        return out
    for chart in np.unique(state.charts):
        mask = state.charts == chart
        out[mask] = christoffel_batch(state.target, state.values[mask], int(chart))
    return out


# ---------------------------------------------------------------------
# Derived fields
# ---------------------------------------------------------------------
def state_fields(state: FlowState) -> Dict[str, np.ndarray]:
    """dphi, nabla dphi, tension, pullback, |dphi|^2, |nabla dphi|^2 and |tau|_h on the grid."""
    G = source_metric(state.source)
    Ginv = np.linalg.inv(G)
    dphi, d2phi = central_derivatives(state)
    h = target_metric_field(state)
    gamma = target_christoffel_field(state)
    sff = d2phi + np.einsum("...abc,...bi,...cj->...aij", gamma, dphi, dphi)
    tension = np.einsum("ij,...aij->...a", Ginv, sff)
    pullback = np.einsum("...ai,...ab,...bj->...ij", dphi, h, dphi)
    return {
        "dphi": dphi,
        "sff": sff,
        "tension": tension,
        "pullback": pullback,
        "energy": np.einsum("ij,...ij->...", Ginv, pullback),
        "sff_norm_sq": np.einsum("ik,jl,...ab,...aij,...bkl->...", Ginv, Ginv, h, sff, sff),
        "tension_norm": np.sqrt(np.maximum(np.einsum("...a,...ab,...b->...", tension, h, tension), 0.0)),
        "metric": np.broadcast_to(G, state.grid.shape + G.shape),
    }


def discrete_energy(state: FlowState) -> float:
    """sum over nodes of |dphi|^2 from forward differences, times the cell volume."""
    G = source_metric(state.source)
    Ginv = np.linalg.inv(G)
    d = forward_differences(state)
    h = target_metric_field(state)
    density = np.einsum("ij,...ai,...ab,...bj->...", Ginv, d, h, d)
    volume = float(np.prod(state.grid.spacing)) * np.sqrt(float(np.linalg.det(G)))
    return float(np.sum(density) * volume)
