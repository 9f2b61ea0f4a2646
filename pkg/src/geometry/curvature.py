"""
curvature.py
------------
Levi-Civita connection and curvature of model manifolds, evaluated pointwise.

Sign convention: R_abcd = g_ae R^e_bcd with
R^a_bcd = d_c Gamma^a_bd - d_d Gamma^a_bc + Gamma^a_ce Gamma^e_bd - Gamma^a_de Gamma^e_bc,
so that R(X, Y, X, Y) = k (g(X,X) g(Y,Y) - g(X,Y)^2) for constant curvature k and round
spheres have positive sectional curvature. Ricci is R_ij = g^ac R_aicj.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Union

import numpy as np

from geometry.linalg import check_conditioning
from geometry.manifolds import (
    ManifoldModel,
    metric_at,
    metric_hessian_at,
    metric_jacobian_at,
)
from utils.errors import DegeneratePlaneError
from utils.logger_config import get_logger

logger = get_logger(__name__)

# Gram determinant below this fraction of g(X,X) g(Y,Y) marks a degenerate plane.
PLANE_DEGENERACY = 1e-12


@dataclass(frozen=True, eq=False)
class CurvatureBundle:
    point: np.ndarray
    chart: int
    metric: np.ndarray
    inverse_metric: np.ndarray
    christoffel: np.ndarray  # [k, i, j] = Gamma^k_ij
    riemann: np.ndarray  # [a, b, c, d] = R_abcd
    ricci: np.ndarray
    scalar: float


@dataclass(frozen=True, eq=False)
class PlaneSpec:
    """A 2-plane spanned by two tangent vectors at one point."""

    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class SecBoundReport:
    K: float
    tolerance: float
    max_sectional: Optional[float]
    worst_point: Optional[list]
    n_planes: int
    passed: bool


# ---------------------------------------------------------------------
# Tensor algebra on raw arrays
# ---------------------------------------------------------------------
def christoffel_from_metric(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Gamma^k_ij from the inverse metric and dg[k, i, j] = d_k g_ij (Koszul formula)."""
    first_kind = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
    return np.einsum("kl,lij->kij", ginv, first_kind)


def riemann_from_metric(g: np.ndarray, gamma: np.ndarray, d2g: np.ndarray) -> np.ndarray:
    """Fully covariant R_abcd from g, Gamma and d2g[k, l, i, j] = d_k d_l g_ij."""
    second = 0.5 * (
        np.einsum("bcad->abcd", d2g)
        + np.einsum("adbc->abcd", d2g)
        - np.einsum("bdac->abcd", d2g)
        - np.einsum("acbd->abcd", d2g)
    )
    quadratic = (
        np.einsum("ef,ebc,fad->abcd", g, gamma, gamma)
        - np.einsum("ef,ebd,fac->abcd", g, gamma, gamma)
    )
    return second + quadratic


def ricci_from_riemann(ginv: np.ndarray, riemann: np.ndarray) -> np.ndarray:
    ric = np.einsum("ac,aicj->ij", ginv, riemann)
    return 0.5 * (ric + ric.T)


def sectional_from_tensor(riemann: np.ndarray, g: np.ndarray, x: np.ndarray, y: np.ndarray,
                          threshold: float = PLANE_DEGENERACY) -> float:
    """R(X, Y, X, Y) / (g(X,X) g(Y,Y) - g(X,Y)^2); DegeneratePlaneError for degenerate planes."""
    xx, yy, xy = x @ g @ x, y @ g @ y, x @ g @ y
    gram = xx * yy - xy ** 2
    if xx <= 0.0 or yy <= 0.0 or gram < threshold * xx * yy:
        raise DegeneratePlaneError(f"Degenerate plane: Gram determinant {gram:.3e}")
    return float(np.einsum("abcd,a,b,c,d->", riemann, x, y, x, y) / gram)


def curvature_symmetry_defects(riemann: np.ndarray) -> Dict[str, float]:
    """Relative defects of the Riemann symmetries and the first Bianchi identity."""
    scale = max(float(np.max(np.abs(riemann))), 1e-300) if riemann.size else 1.0
    bianchi = riemann + np.einsum("iklj->ijkl", riemann) + np.einsum("iljk->ijkl", riemann)
    return {
        "antisymmetry_first_pair": float(np.max(np.abs(riemann + riemann.transpose(1, 0, 2, 3)))) / scale,
        "antisymmetry_second_pair": float(np.max(np.abs(riemann + riemann.transpose(0, 1, 3, 2)))) / scale,
        "pair_symmetry": float(np.max(np.abs(riemann - riemann.transpose(2, 3, 0, 1)))) / scale,
        "first_bianchi": float(np.max(np.abs(bianchi))) / scale,
    }


# ---------------------------------------------------------------------
# Pointwise operations on manifolds
# ---------------------------------------------------------------------
def christoffel(manifold: ManifoldModel, point: np.ndarray, chart: int = 0) -> np.ndarray:
    """Gamma^k_ij at a chart point, symmetric in (i, j)."""
    g = metric_at(manifold, point, chart)
    check_conditioning(g)
    dg = metric_jacobian_at(manifold, point, chart)
    return christoffel_from_metric(np.linalg.inv(g), dg)


def curvature_bundle(manifold: ManifoldModel, point: np.ndarray, chart: int = 0) -> CurvatureBundle:
    point = np.asarray(point, dtype=float)
    g = metric_at(manifold, point, chart)
    check_conditioning(g)
    ginv = np.linalg.inv(g)
    gamma = christoffel_from_metric(ginv, metric_jacobian_at(manifold, point, chart))
    riem = riemann_from_metric(g, gamma, metric_hessian_at(manifold, point, chart))
    ric = ricci_from_riemann(ginv, riem)
    return CurvatureBundle(
        point=point,
        chart=chart,
        metric=g,
        inverse_metric=ginv,
        christoffel=gamma,
        riemann=riem,
        ricci=ric,
        scalar=float(np.einsum("ij,ij->", ginv, ric)),
    )


def riemann(manifold: ManifoldModel, point: np.ndarray, chart: int = 0) -> np.ndarray:
    return curvature_bundle(manifold, point, chart).riemann


def ricci(manifold: ManifoldModel, point: np.ndarray, chart: int = 0) -> np.ndarray:
    return curvature_bundle(manifold, point, chart).ricci


def scalar_curvature(manifold: ManifoldModel, point: np.ndarray, chart: int = 0) -> float:
    return curvature_bundle(manifold, point, chart).scalar


def sectional(manifold: ManifoldModel, point: np.ndarray, plane: PlaneSpec, chart: int = 0) -> float:
    bundle = curvature_bundle(manifold, point, chart)
    return sectional_from_tensor(bundle.riemann, bundle.metric,
                                 np.asarray(plane.x, dtype=float), np.asarray(plane.y, dtype=float))


def _random_planes(rng: np.random.Generator, dim: int, count: int):
    """count pairs of Gaussian vectors; degenerate pairs are dropped by sectional_samples."""
    xs = rng.normal(size=(count, dim))
    ys = rng.normal(size=(count, dim))
    return xs, ys


def sectional_samples(bundle: CurvatureBundle, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized sectional values for rows of xs, ys; degenerate rows give nan."""
    g = bundle.metric
    num = np.einsum("abcd,na,nb,nc,nd->n", bundle.riemann, xs, ys, xs, ys)
    xx = np.einsum("na,ab,nb->n", xs, g, xs)
    yy = np.einsum("na,ab,nb->n", ys, g, ys)
    xy = np.einsum("na,ab,nb->n", xs, g, ys)
    gram = xx * yy - xy ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        values = num / gram
    return np.where(gram >= PLANE_DEGENERACY * xx * yy, values, np.nan)


def sec_upper_bound_check(manifold: ManifoldModel, K: float,
                          sample_points: Union[int, np.ndarray],
                          planes_per_point: int, seed: int = 0,
                          tol: float = 1e-9, chart: int = 0) -> SecBoundReport:
    """Sample sectional curvatures and compare their maximum against K + tol."""
    if not np.isfinite(K):
        raise ValueError(f"Sectional bound must be finite, got {K}")
    if planes_per_point <= 0:
        raise ValueError("planes_per_point must be positive")
    rng = np.random.default_rng(seed)
    points = (manifold.sample_points(sample_points, rng) if isinstance(sample_points, (int, np.integer))
              else np.atleast_2d(np.asarray(sample_points, dtype=float)))
    if len(points) == 0:
        raise ValueError("Sampling budget must be positive")

    if manifold.dim < 2:
        logger.info(f"{manifold.name} has dimension 1: no 2-planes, sectional bound holds vacuously")
        return SecBoundReport(K=K, tolerance=tol, max_sectional=None, worst_point=None, n_planes=0, passed=True)

    best, worst_point, n_planes = -np.inf, None, 0
    for point in points:
        bundle = curvature_bundle(manifold, point, chart)
        xs, ys = _random_planes(rng, manifold.dim, planes_per_point)
        values = sectional_samples(bundle, xs, ys)
        values = values[np.isfinite(values)]
        n_planes += values.size
        if values.size and values.max() > best:
            best, worst_point = float(values.max()), point.tolist()

    passed = bool(best <= K + tol)
    logger.info(f"Sectional bound on {manifold.name}: max sampled {best:.6g} vs K={K:g} "
                f"over {n_planes} planes -> {'pass' if passed else 'FAIL'}")
    if not passed:
        logger.warning(f"sec <= {K:g} violated on {manifold.name} at {worst_point}")
    return SecBoundReport(K=K, tolerance=tol, max_sectional=best, worst_point=worst_point,
                          n_planes=n_planes, passed=passed)


# ---------------------------------------------------------------------
# Batched connection coefficients for grid stencils
# ---------------------------------------------------------------------
def christoffel_batch(manifold: ManifoldModel, points: np.ndarray, chart: int = 0) -> np.ndarray:
    """
    Gamma^k_ij for every row of points (..., m) -> (..., m, m, m).

    Flat and conformally flat charts use closed forms; other charts are evaluated pointwise.
    """
    points = np.asarray(points, dtype=float)
    m = manifold.dim
    c = manifold.chart(chart)
    shape = points.shape[:-1]
    if c.flat:
        return np.zeros(shape + (m, m, m))
    if manifold.derivatives == "analytic" and c.log_factor_gradient is not None and c.conformal_base is not None:
        df = c.log_factor_gradient(points)
        base_inv = np.linalg.inv(c.conformal_base)
        eye = np.eye(m)
        raised = np.einsum("kl,...l->...k", base_inv, df)
        return (np.einsum("ki,...j->...kij", eye, df)
                + np.einsum("kj,...i->...kij", eye, df)
                - np.einsum("ij,...k->...kij", c.conformal_base, raised))
    flat_points = points.reshape(-1, m)
    out = np.stack([christoffel(manifold, p, chart) for p in flat_points])
    return out.reshape(shape + (m, m, m))
