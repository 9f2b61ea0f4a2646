"""
models.py
---------
Smooth maps between model manifolds, expressed in one chart pair.

Builtin maps carry closed-form first and second derivatives; custom maps fall back to
central finite differences (see maps.calculus).
"""

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Optional

import numpy as np

from geometry.manifolds import FD_STEP1, FD_STEP2, ManifoldKind, ManifoldModel, round_sphere

ChartMap = Callable[[np.ndarray], np.ndarray]


class MapKind(str, Enum):
    CONSTANT = "constant"
    IDENTITY = "identity"
    LINEAR_TORUS = "linear_torus"
    PERTURBED_TORUS = "perturbed_torus"
    EQUATOR_INCLUSION = "equator_inclusion"
    CHART_TRANSITION = "chart_transition"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class MapModel:
    """phi : (source, g) -> (target, h) in the chart pair (source_chart, target_chart)."""

    source: ManifoldModel
    target: ManifoldModel
    chart_map: ChartMap
    kind: MapKind
    name: str
    differential_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None  # n x m
    hessian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None  # [a, i, j]
    source_chart: int = 0
    target_chart: int = 0
    # Torus maps: chart_map(x) = linear_part @ x + (periodic part); used by the flow.
    linear_part: Optional[np.ndarray] = None
    derivatives: str = "analytic"
    fd_step1: float = FD_STEP1
    fd_step2: float = FD_STEP2
    params: Mapping[str, object] = field(default_factory=dict)

    def with_target(self, target: ManifoldModel) -> "MapModel":
        """Same chart map into a target carrying another metric on the same charts."""
        if target.dim != self.target.dim:
            raise ValueError(f"Target dimension mismatch: {target.dim} != {self.target.dim}")
        return dataclasses.replace(self, target=target)

    def with_source(self, source: ManifoldModel) -> "MapModel":
        if source.dim != self.source.dim:
            raise ValueError(f"Source dimension mismatch: {source.dim} != {self.source.dim}")
        return dataclasses.replace(self, source=source)

    def with_derivatives(self, mode: str, fd_step1: Optional[float] = None,
                         fd_step2: Optional[float] = None) -> "MapModel":
        """Switch the map, its source and its target to 'analytic' or 'fd' derivatives."""
        if mode not in ("analytic", "fd"):
            raise ValueError(f"Unknown derivative mode: {mode}")
        step1 = self.fd_step1 if fd_step1 is None else fd_step1
        step2 = self.fd_step2 if fd_step2 is None else fd_step2
        return dataclasses.replace(
            self,
            derivatives=mode,
            fd_step1=step1,
            fd_step2=step2,
            source=self.source.with_derivatives(mode, step1, step2),
            target=self.target.with_derivatives(mode, step1, step2),
        )


# ---------------------------------------------------------------------
# Builtin maps
# ---------------------------------------------------------------------
def constant_map(source: ManifoldModel, target: ManifoldModel, value, target_chart: int = 0) -> MapModel:
    value = np.asarray(value, dtype=float).reshape(target.dim)
    m, n = source.dim, target.dim
    return MapModel(
        source=source,
        target=target,
        chart_map=lambda x: value.copy(),
        kind=MapKind.CONSTANT,
        name=f"const->{target.name}",
        differential_fn=lambda x: np.zeros((n, m)),
        hessian_fn=lambda x: np.zeros((n, m, m)),
        target_chart=target_chart,
        linear_part=np.zeros((n, m)) if target.kind == ManifoldKind.FLAT_TORUS else None,
        params={"value": value},
    )


def identity_map(source: ManifoldModel, target: Optional[ManifoldModel] = None, chart: int = 0) -> MapModel:
    """Coordinate identity between two metrics on the same chart space (target defaults to source)."""
    target = source if target is None else target
    if target.dim != source.dim:
        raise ValueError("Identity map needs equal dimensions")
    m = source.dim
    return MapModel(
        source=source,
        target=target,
        chart_map=lambda x: np.array(x, dtype=float),
        kind=MapKind.IDENTITY,
        name=f"id:{source.name}->{target.name}",
        differential_fn=lambda x: np.eye(m),
        hessian_fn=lambda x: np.zeros((m, m, m)),
        source_chart=chart,
        target_chart=chart,
        linear_part=np.eye(m) if target.kind == ManifoldKind.FLAT_TORUS else None,
    )


def linear_torus_map(source: ManifoldModel, target: ManifoldModel, matrix, offset=None) -> MapModel:
    """x -> A x + b between flat tori; an affine, totally geodesic map."""
    A = np.asarray(matrix, dtype=float)
    n, m = target.dim, source.dim
    if A.shape != (n, m):
        raise ValueError(f"Matrix must be {n}x{m}, got {A.shape}")
    b = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    return MapModel(
        source=source,
        target=target,
        chart_map=lambda x: A @ np.asarray(x, dtype=float) + b,
        kind=MapKind.LINEAR_TORUS,
        name=f"linear:{source.name}->{target.name}",
        differential_fn=lambda x: A.copy(),
        hessian_fn=lambda x: np.zeros((n, m, m)),
        linear_part=A,
        params={"matrix": A, "offset": b},
    )


def perturbed_torus_map(source: ManifoldModel, target: ManifoldModel, matrix=None,
                        amplitude: float = 0.1, offset=None) -> MapModel:
    """phi^a(x) = (A x + b)^a + eps sin(2 pi x_(a mod m)); A defaults to the identity."""
    n, m = target.dim, source.dim
    A = np.eye(n, m) if matrix is None else np.asarray(matrix, dtype=float)
    b = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    eps = float(amplitude)
    axes = np.arange(n) % m
    two_pi = 2.0 * np.pi

    def chart_map(x):
        x = np.asarray(x, dtype=float)
        return A @ x + b + eps * np.sin(two_pi * x[axes])

    def differential(x):
        x = np.asarray(x, dtype=float)
        out = A.copy()
        out[np.arange(n), axes] += eps * two_pi * np.cos(two_pi * x[axes])
        return out

    def hessian(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((n, m, m))
        out[np.arange(n), axes, axes] = -eps * two_pi ** 2 * np.sin(two_pi * x[axes])
        return out

    return MapModel(
        source=source,
        target=target,
        chart_map=chart_map,
        kind=MapKind.PERTURBED_TORUS,
        name=f"perturbed:{source.name}->{target.name}",
        differential_fn=differential,
        hessian_fn=hessian,
        linear_part=A,
        params={"matrix": A, "amplitude": eps, "offset": b},
    )


def equator_inclusion(circle_radius: float = 1.0, sphere_radius: float = 1.0) -> MapModel:
    """
    S^1(r) -> S^2(R) onto the equator, homothetic with factor (R/r)^2.

    In the north charts the equator of S^2(R) is the coordinate circle |x| = R, so the map is
    (R/r) times the planar embedding of S^1(r).
    """
    r, R = float(circle_radius), float(sphere_radius)
    source, target = round_sphere(1, r), round_sphere(2, R)
    k = R / r

    def chart_map(t):
        t = float(np.asarray(t, dtype=float).reshape(-1)[0])
        d = r ** 2 + t ** 2
        return k * np.array([2.0 * r ** 2 * t / d, r * (t ** 2 - r ** 2) / d])

    def differential(t):
        t = float(np.asarray(t, dtype=float).reshape(-1)[0])
        d = r ** 2 + t ** 2
        return k * np.array([[2.0 * r ** 2 * (r ** 2 - t ** 2) / d ** 2], [4.0 * r ** 3 * t / d ** 2]])

    def hessian(t):
        t = float(np.asarray(t, dtype=float).reshape(-1)[0])
        d = r ** 2 + t ** 2
        second = np.array([4.0 * r ** 2 * t * (t ** 2 - 3.0 * r ** 2) / d ** 3,
                           4.0 * r ** 3 * (r ** 2 - 3.0 * t ** 2) / d ** 3])
        return k * second.reshape(2, 1, 1)

    return MapModel(
        source=source,
        target=target,
        chart_map=chart_map,
        kind=MapKind.EQUATOR_INCLUSION,
        name=f"equator:{source.name}->{target.name}",
        differential_fn=differential,
        hessian_fn=hessian,
        params={"homothety": k ** 2},
    )


def chart_transition_map(sphere: ManifoldModel) -> MapModel:
    """Identity of a round sphere written from its north chart into its south chart."""
    if sphere.kind != ManifoldKind.ROUND_SPHERE:
        raise ValueError("chart_transition_map needs a round sphere")
    r2 = float(sphere.params["radius"]) ** 2
    m = sphere.dim
    eye = np.eye(m)

    def chart_map(x):
        x = np.asarray(x, dtype=float)
        return r2 * x / float(x @ x)

    def differential(x):
        x = np.asarray(x, dtype=float)
        s = float(x @ x)
        return r2 * (eye / s - 2.0 * np.outer(x, x) / s ** 2)

    def hessian(x):
        x = np.asarray(x, dtype=float)
        s = float(x @ x)
        out = (-2.0 * np.einsum("ak,j->akj", eye, x)
               - 2.0 * np.einsum("aj,k->akj", eye, x)
               - 2.0 * np.einsum("a,kj->akj", x, eye)) / s ** 2
        out += 8.0 * np.einsum("a,k,j->akj", x, x, x) / s ** 3
        return r2 * out

    return MapModel(
        source=sphere,
        target=sphere,
        chart_map=chart_map,
        kind=MapKind.CHART_TRANSITION,
        name=f"transition:{sphere.name}",
        differential_fn=differential,
        hessian_fn=hessian,
        source_chart=0,
        target_chart=1,
    )


def custom_map(source: ManifoldModel, target: ManifoldModel, chart_map: ChartMap,
               name: str = "custom", differential: Optional[Callable] = None,
               hessian: Optional[Callable] = None, source_chart: int = 0,
               target_chart: int = 0) -> MapModel:
    analytic = differential is not None and hessian is not None
    return MapModel(
        source=source,
        target=target,
        chart_map=chart_map,
        kind=MapKind.CUSTOM,
        name=name,
        differential_fn=differential,
        hessian_fn=hessian,
        source_chart=source_chart,
        target_chart=target_chart,
        derivatives="analytic" if analytic else "fd",
    )
