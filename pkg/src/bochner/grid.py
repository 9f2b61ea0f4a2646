"""
grid.py
-------
Grid-level Bochner quantities.

The Laplace-Beltrami operator of the scalar |dphi|^2 is applied in two phases: the
energy-density field is evaluated on the whole stencil support first, then differentiated
with second-order central differences,

    Delta f = g^ij d_i d_j f - g^ij Gamma^k_ij d_k f.

Periodic grids (torus sources) wrap around; other grids evaluate one extra layer of nodes.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from bochner.engine import bochner_report
from geometry.curvature import christoffel_batch
from geometry.manifolds import ManifoldModel, metric_at
from maps.calculus import energy_density, tension_norm
from maps.models import MapModel
from utils.errors import HarmonicityPreconditionError, ResolutionError
from utils.logger_config import get_logger

logger = get_logger(__name__)

MIN_NODES_PER_AXIS = 3
HARMONIC_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class GridSpec:
    origin: np.ndarray
    spacing: np.ndarray
    shape: Tuple[int, ...]
    periodic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(-1))
        object.__setattr__(self, "spacing", np.asarray(self.spacing, dtype=float).reshape(-1))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if not (len(self.origin) == len(self.spacing) == len(self.shape)):
            raise ValueError("origin, spacing and shape must have the same length")
        if np.any(self.spacing <= 0.0):
            raise ValueError(f"Grid spacing must be positive, got {self.spacing.tolist()}")

    @classmethod
    def torus(cls, dim: int, resolution: int) -> "GridSpec":
        """Periodic grid covering the unit cell [0, 1)^dim."""
        return cls(origin=np.zeros(dim), spacing=np.full(dim, 1.0 / resolution),
                   shape=(resolution,) * dim, periodic=True)

    @property
    def dim(self) -> int:
        return len(self.shape)

    def points(self, pad: int = 0) -> np.ndarray:
        """Node coordinates, shape (*shape, dim); pad adds that many layers on every side."""
        axes = [self.origin[k] + self.spacing[k] * np.arange(-pad, self.shape[k] + pad) for k in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def validate(self) -> None:
        if min(self.shape) < MIN_NODES_PER_AXIS:
            raise ResolutionError(f"Grid {self.shape} is too coarse: the stencil needs "
                                  f"{MIN_NODES_PER_AXIS} nodes per axis")


def _field(fn, points: np.ndarray) -> np.ndarray:
    flat = points.reshape(-1, points.shape[-1])
    return np.array([fn(p) for p in flat]).reshape(points.shape[:-1])


def _shifted(padded: np.ndarray, offsets, shape) -> np.ndarray:
    index = tuple(slice(1 + o, 1 + o + n) for o, n in zip(offsets, shape))
    return padded[index]


def grid_gradient_hessian(padded: np.ndarray, grid: GridSpec):
    """Central-difference gradient (..., m) and Hessian (..., m, m) of a field padded by one layer."""
    m, shape, s = grid.dim, grid.shape, grid.spacing
    zero = [0] * m
    center = _shifted(padded, zero, shape)
    grad = np.empty(shape + (m,))
    hess = np.empty(shape + (m, m))
    for i in range(m):
        plus, minus = list(zero), list(zero)
        plus[i], minus[i] = 1, -1
        fp, fm = _shifted(padded, plus, shape), _shifted(padded, minus, shape)
        grad[..., i] = (fp - fm) / (2.0 * s[i])
        hess[..., i, i] = (fp - 2.0 * center + fm) / s[i] ** 2
        for j in range(i + 1, m):
            corners = []
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                off = list(zero)
                off[i], off[j] = si, sj
                corners.append(_shifted(padded, off, shape))
            mixed = (corners[0] - corners[1] - corners[2] + corners[3]) / (4.0 * s[i] * s[j])
            hess[..., i, j] = mixed
            hess[..., j, i] = mixed
    return grad, hess


def laplace_beltrami(padded: np.ndarray, grid: GridSpec, manifold: ManifoldModel, chart: int = 0) -> np.ndarray:
    """Delta f on the grid nodes for a field f padded by one layer."""
    points = grid.points()
    grad, hess = grid_gradient_hessian(padded, grid)
    flat = points.reshape(-1, grid.dim)
    ginv = np.stack([np.linalg.inv(metric_at(manifold, p, chart)) for p in flat]).reshape(grid.shape + (grid.dim,) * 2)
    gamma = christoffel_batch(manifold, points, chart)
    return (np.einsum("...ij,...ij->...", ginv, hess)
            - np.einsum("...ij,...kij,...k->...", ginv, gamma, grad))


def energy_density_padded(phi: MapModel, grid: GridSpec) -> np.ndarray:
    """|dphi|^2 on the grid plus one stencil layer (wrapped for periodic grids)."""
    grid.validate()

    def fn(p):
        return energy_density(phi, p)

    if grid.periodic:
        return np.pad(_field(fn, grid.points()), 1, mode="wrap")
    return _field(fn, grid.points(pad=1))


def laplacian_energy_density(phi: MapModel, grid: GridSpec) -> np.ndarray:
    """Delta_g |dphi|^2 at every grid node."""
    padded = energy_density_padded(phi, grid)
    field = laplace_beltrami(padded, grid, phi.source, phi.source_chart)
    logger.info(f"Laplacian of |dphi|^2 for {phi.name} on grid {grid.shape}: "
                f"sup {float(np.max(np.abs(field))):.3e}")
    return field


@dataclass(frozen=True, eq=False)
class BochnerGridResult:
    table: pd.DataFrame
    sup_residual: float
    sup_tension: float
    harmonic_tol: float
    K: float


def tension_sup(phi: MapModel, grid: GridSpec) -> float:
    return float(np.max(_field(lambda p: tension_norm(phi, p), grid.points())))


def bochner_residual(phi: MapModel, grid: GridSpec, K: float = 0.0,
                     harmonic_tol: float = HARMONIC_TOL) -> BochnerGridResult:
    """
    Residual field 1/2 Delta |dphi|^2 - |nabla dphi|^2 - Q on the grid.

    Raises HarmonicityPreconditionError (carrying sup|tau|) when the map is not harmonic
    on the grid to within harmonic_tol.
    """
    grid.validate()
    sup_tau = tension_sup(phi, grid)
    if sup_tau > harmonic_tol:
        logger.warning(f"Bochner identity requested for non-harmonic {phi.name}: sup|tau| = {sup_tau:.3e}")
        raise HarmonicityPreconditionError(sup_tau, harmonic_tol)

    laplacian = laplacian_energy_density(phi, grid)
    rows = []
    points = grid.points()
    for index in np.ndindex(*grid.shape):
        point = points[index]
        report = bochner_report(phi, point, K, laplacian_energy=float(laplacian[index]))
        row = {f"x{k}": float(point[k]) for k in range(grid.dim)}
        row.update({key: value for key, value in report.as_dict().items() if key != "point"})
        rows.append(row)
    table = pd.DataFrame(rows)
    sup_residual = float(table["residual"].abs().max())
    logger.info(f"Bochner residual for {phi.name}: sup {sup_residual:.3e} over {len(table)} nodes "
                f"(sup|tau| = {sup_tau:.3e})")
    return BochnerGridResult(table=table, sup_residual=sup_residual, sup_tension=sup_tau,
                             harmonic_tol=harmonic_tol, K=float(K))


@dataclass(frozen=True)
class SubharmonicCertificate:
    min_half_laplacian: float
    min_bochner_rhs: float
    tolerance: float
    passed: bool


def certify_subharmonic(result: BochnerGridResult, tol: Optional[float] = None) -> SubharmonicCertificate:
    """1/2 Delta |dphi|^2 >= -tol at every node, read both directly and through |nabla dphi|^2 + Q0 + Q1."""
    tol = result.harmonic_tol if tol is None else tol
    table = result.table
    half = float((0.5 * table["laplacian_energy"]).min())
    rhs = float((table["sff_norm_sq"] + table["q0"] + table["q1"]).min())
    passed = bool(half >= -tol and rhs >= -tol)
    if not passed:
        logger.warning(f"Subharmonicity not certified: min 1/2 Delta|dphi|^2 = {half:.3e}, "
                       f"min |nabla dphi|^2 + Q = {rhs:.3e}")
    return SubharmonicCertificate(min_half_laplacian=half, min_bochner_rhs=rhs, tolerance=tol, passed=passed)
