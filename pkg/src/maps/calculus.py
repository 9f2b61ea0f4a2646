"""
calculus.py
-----------
First- and second-order invariants of a smooth map phi : (M, g) -> (N, h) at a point.

 - differential phi^a_i, pullback metric, energy density |dphi|^2
 - second fundamental form (nabla dphi)^a_ij and tension field
 - rank of dphi in orthonormal frames
 - the hypothesis residual Ric_g - (m-1) K phi*h
 - the curve-acceleration identity used to validate nabla dphi independently
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from geometry.curvature import christoffel, curvature_bundle
from geometry.linalg import generalized_eigenvalues, orthonormal_differential
from geometry.manifolds import metric_at
from maps.models import MapModel
from utils.errors import ChartError, DomainError
from utils.logger_config import get_logger

logger = get_logger(__name__)

# Singular values below RANK_TOL * largest are treated as zero.
RANK_TOL = 1e-8
# Finite-difference Hessians at steps h and 2h disagreeing by more than this (relative) are noisy.
HESSIAN_NOISE_TOL = 1e-3


@dataclass(frozen=True, eq=False)
class SecondFundamentalForm:
    point: np.ndarray
    tensor: np.ndarray  # [a, i, j], symmetric in (i, j)
    norm_sq: float
    noisy: bool = False


# ---------------------------------------------------------------------
# Evaluation and raw derivatives
# ---------------------------------------------------------------------
def evaluate(phi: MapModel, point: np.ndarray) -> np.ndarray:
    """Image of a source chart point in the target chart; ChartError when it leaves the chart."""
    point = np.asarray(point, dtype=float)
    if not phi.source.chart(phi.source_chart).contains(point):
        raise DomainError(f"Point {point.tolist()} lies outside the source chart of {phi.name}")
    image = np.asarray(phi.chart_map(point), dtype=float).reshape(phi.target.dim)
    if not phi.target.chart(phi.target_chart).contains(image):
        raise ChartError(f"{phi.name} maps {point.tolist()} to {image.tolist()}, "
                         f"outside target chart {phi.target_chart}")
    return image


def _raw(phi: MapModel, x: np.ndarray) -> np.ndarray:
    return np.asarray(phi.chart_map(x), dtype=float).reshape(phi.target.dim)


def _fd_differential(phi: MapModel, x: np.ndarray, step: float) -> np.ndarray:
    m = x.size
    columns = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = step
        columns.append((_raw(phi, x + e) - _raw(phi, x - e)) / (2.0 * step))
    return np.stack(columns, axis=1)


def _fd_hessian(phi: MapModel, x: np.ndarray, step: float) -> np.ndarray:
    m, n = x.size, phi.target.dim
    out = np.empty((n, m, m))
    center = _raw(phi, x)
    for i in range(m):
        ei = np.zeros(m)
        ei[i] = step
        out[:, i, i] = (_raw(phi, x + ei) - 2.0 * center + _raw(phi, x - ei)) / step ** 2
        for j in range(i + 1, m):
            ej = np.zeros(m)
            ej[j] = step
            mixed = (_raw(phi, x + ei + ej) - _raw(phi, x + ei - ej)
                     - _raw(phi, x - ei + ej) + _raw(phi, x - ei - ej)) / (4.0 * step ** 2)
            out[:, i, j] = mixed
            out[:, j, i] = mixed
    return out


def differential(phi: MapModel, point: np.ndarray) -> np.ndarray:
    """n x m matrix phi^a_i in the active chart pair."""
    point = np.asarray(point, dtype=float)
    evaluate(phi, point)
    if phi.derivatives == "analytic" and phi.differential_fn is not None:
        return np.asarray(phi.differential_fn(point), dtype=float).reshape(phi.target.dim, phi.source.dim)
    return _fd_differential(phi, point, phi.fd_step1)


def map_hessian(phi: MapModel, point: np.ndarray):
    """(d_i d_j phi^a, noisy flag); the flag is only raised on the finite-difference path."""
    point = np.asarray(point, dtype=float)
    if phi.derivatives == "analytic" and phi.hessian_fn is not None:
        hess = np.asarray(phi.hessian_fn(point), dtype=float).reshape(phi.target.dim, phi.source.dim, phi.source.dim)
        return hess, False
    hess = _fd_hessian(phi, point, phi.fd_step2)
    coarse = _fd_hessian(phi, point, 2.0 * phi.fd_step2)
    scale = max(float(np.max(np.abs(hess))), 1.0)
    noisy = bool(np.max(np.abs(hess - coarse)) > HESSIAN_NOISE_TOL * scale)
    if noisy:
        logger.warning(f"{phi.name}: finite-difference Hessians at steps h and 2h disagree at {point.tolist()}")
    return hess, noisy


# ---------------------------------------------------------------------
# First-order invariants
# ---------------------------------------------------------------------
def target_metric(phi: MapModel, point: np.ndarray) -> np.ndarray:
    """h at the image of point."""
    return metric_at(phi.target, evaluate(phi, point), phi.target_chart)


def pullback_metric(phi: MapModel, point: np.ndarray) -> np.ndarray:
    """(phi*h)_ij = h_ab phi^a_i phi^b_j."""
    dphi = differential(phi, point)
    h = target_metric(phi, point)
    pulled = dphi.T @ h @ dphi
    return 0.5 * (pulled + pulled.T)


def energy_density(phi: MapModel, point: np.ndarray) -> float:
    """|dphi|^2 = g^ij h_ab phi^a_i phi^b_j (twice the energy density)."""
    g = metric_at(phi.source, point, phi.source_chart)
    dphi = differential(phi, point)
    h = target_metric(phi, point)
    return float(np.einsum("ij,ai,ab,bj->", np.linalg.inv(g), dphi, h, dphi))


def rank_at(phi: MapModel, point: np.ndarray, rel_tol: float = RANK_TOL) -> int:
    """Number of singular values of dphi (orthonormal frames) above rel_tol * the largest."""
    g = metric_at(phi.source, point, phi.source_chart)
    h = target_metric(phi, point)
    singular = np.linalg.svd(orthonormal_differential(differential(phi, point), g, h), compute_uv=False)
    if singular.size == 0 or singular[0] == 0.0:
        return 0
    return int(np.sum(singular > rel_tol * singular[0]))


def pullback_rank(phi: MapModel, point: np.ndarray, rel_tol: float = RANK_TOL) -> int:
    """Rank of phi*h relative to g; eigenvalues are squared singular values, hence rel_tol**2."""
    g = metric_at(phi.source, point, phi.source_chart)
    eigenvalues = generalized_eigenvalues(pullback_metric(phi, point), g)
    largest = float(np.max(np.abs(eigenvalues)))
    if largest == 0.0:
        return 0
    return int(np.sum(eigenvalues > rel_tol ** 2 * largest))


# ---------------------------------------------------------------------
# Second-order invariants
# ---------------------------------------------------------------------
def second_fundamental_form(phi: MapModel, point: np.ndarray) -> SecondFundamentalForm:
    """
    (nabla dphi)^a_ij = d_i d_j phi^a - Gamma^k_ij(g) phi^a_k + Gamma^a_bc(h)(phi) phi^b_i phi^c_j.
    """
    point = np.asarray(point, dtype=float)
    image = evaluate(phi, point)
    dphi = differential(phi, point)
    hess, noisy = map_hessian(phi, point)
    gamma_g = christoffel(phi.source, point, phi.source_chart)
    gamma_h = christoffel(phi.target, image, phi.target_chart)
    tensor = (hess
              - np.einsum("kij,ak->aij", gamma_g, dphi)
              + np.einsum("abc,bi,cj->aij", gamma_h, dphi, dphi))
    tensor = 0.5 * (tensor + tensor.transpose(0, 2, 1))

    ginv = np.linalg.inv(metric_at(phi.source, point, phi.source_chart))
    h = metric_at(phi.target, image, phi.target_chart)
    norm_sq = float(np.einsum("ik,jl,ab,aij,bkl->", ginv, ginv, h, tensor, tensor))
    return SecondFundamentalForm(point=point, tensor=tensor, norm_sq=norm_sq, noisy=noisy)


def tension_field(phi: MapModel, point: np.ndarray) -> np.ndarray:
    """tau^a = g^ij (nabla dphi)^a_ij, a target tangent vector at phi(point)."""
    sff = second_fundamental_form(phi, point)
    ginv = np.linalg.inv(metric_at(phi.source, point, phi.source_chart))
    return np.einsum("ij,aij->a", ginv, sff.tensor)


def tension_norm(phi: MapModel, point: np.ndarray) -> float:
    """|tau(phi)|_h at a point."""
    tau = tension_field(phi, point)
    return float(np.sqrt(max(tau @ target_metric(phi, point) @ tau, 0.0)))


def ricci_lower_bound_residual(phi: MapModel, point: np.ndarray, K: float) -> float:
    """Smallest eigenvalue of Ric_g - (m-1) K phi*h relative to g; >= 0 iff the bound holds at point."""
    bundle = curvature_bundle(phi.source, point, phi.source_chart)
    m = phi.source.dim
    pencil = bundle.ricci - (m - 1) * K * pullback_metric(phi, point)
    return float(generalized_eigenvalues(pencil, bundle.metric)[0])


# ---------------------------------------------------------------------
# Curve identity
# ---------------------------------------------------------------------
def curve_identity_residual(phi: MapModel, point: np.ndarray, rng: np.random.Generator,
                            step: float = 1e-4, spread: float = 0.2,
                            coefficients: Optional[np.ndarray] = None) -> float:
    """
    h-norm of sigma'' - dphi(gamma'') - (nabla dphi)(gamma', gamma') at t = 0.

    gamma is a random quintic through point, sigma = phi o gamma; both accelerations are
    covariant, sigma's derivatives come from central differences with the given step.
    """
    point = np.asarray(point, dtype=float)
    m = phi.source.dim
    coeffs = spread * rng.normal(size=(5, m)) if coefficients is None else np.asarray(coefficients, dtype=float)

    def gamma(t):
        return point + sum(coeffs[k] * t ** (k + 1) for k in range(5))

    velocity, raw_accel = coeffs[0], 2.0 * coeffs[1]
    gamma_g = christoffel(phi.source, point, phi.source_chart)
    accel = raw_accel + np.einsum("kij,i,j->k", gamma_g, velocity, velocity)

    image = evaluate(phi, point)
    ahead, behind = _raw(phi, gamma(step)), _raw(phi, gamma(-step))
    sigma_dot = (ahead - behind) / (2.0 * step)
    sigma_ddot = (ahead - 2.0 * image + behind) / step ** 2
    gamma_h = christoffel(phi.target, image, phi.target_chart)
    sigma_accel = sigma_ddot + np.einsum("abc,b,c->a", gamma_h, sigma_dot, sigma_dot)

    sff = second_fundamental_form(phi, point)
    predicted = differential(phi, point) @ accel + np.einsum("aij,i,j->a", sff.tensor, velocity, velocity)
    defect = sigma_accel - predicted
    h = metric_at(phi.target, image, phi.target_chart)
    return float(np.sqrt(max(defect @ h @ defect, 0.0)))
