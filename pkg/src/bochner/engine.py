"""
engine.py
---------
Pointwise curvature terms of the Bochner identity for harmonic maps

    1/2 Delta |dphi|^2 = |nabla dphi|^2 + Q(dphi),

with Q = <Ric_g, phi*h>_g - g^ik g^jl R^N_abcd phi^a_i phi^b_j phi^c_k phi^d_l, and its split
Q = Q0 + Q1 obtained by adding and subtracting (m-1) K |phi*h|^2_g.

Q1 is available in three forms: direct contraction, the frame form
(m-1) K sum c_ij^2 - sum kappa_ij (c_ii c_jj - c_ij^2), and the pairwise sum form whose
summands are non-negative whenever sec_h <= K.
"""

from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np

from bochner.frames import FrameData, build_frame_data
from geometry.curvature import curvature_bundle
from maps.calculus import differential, energy_density, evaluate, second_fundamental_form
from maps.models import MapModel
from utils.logger_config import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class QContractions:
    """The three scalar contractions every form of Q is assembled from."""

    ricci_term: float  # <Ric_g, phi*h>_g
    riemann_term: float  # g^ik g^jl R^N(dphi_i, dphi_j, dphi_k, dphi_l)
    pullback_square: float  # |phi*h|_g^2 = tr((g^-1 phi*h)^2)
    dim: int

    def q(self) -> float:
        return self.ricci_term - self.riemann_term

    def split(self, K: float) -> Tuple[float, float]:
        shift = (self.dim - 1) * K * self.pullback_square
        return self.ricci_term - shift, shift - self.riemann_term


@dataclass(frozen=True)
class BochnerReport:
    point: list
    energy_density: float
    sff_norm_sq: float
    q: float
    q0: float
    q1: float
    K: float
    laplacian_energy: Optional[float] = None
    residual: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------
# Contractions on raw arrays
# ---------------------------------------------------------------------
def q_contractions(ginv: np.ndarray, ricci_source: np.ndarray, h: np.ndarray,
                   riemann_target: np.ndarray, dphi: np.ndarray) -> QContractions:
    pullback = dphi.T @ h @ dphi
    mixed = ginv @ pullback
    ricci_term = float(np.einsum("ik,jl,ij,kl->", ginv, ginv, ricci_source, pullback))
    pulled_riemann = np.einsum("abcd,ai,bj,ck,dl->ijkl", riemann_target, dphi, dphi, dphi, dphi, optimize=True)
    riemann_term = float(np.einsum("ik,jl,ijkl->", ginv, ginv, pulled_riemann))
    return QContractions(
        ricci_term=ricci_term,
        riemann_term=riemann_term,
        pullback_square=float(np.trace(mixed @ mixed)),
        dim=dphi.shape[1],
    )


def q1_contraction(dphi: np.ndarray, riemann_target: np.ndarray, K: float,
                   ginv: Optional[np.ndarray] = None, h: Optional[np.ndarray] = None) -> float:
    """Q1 by direct contraction; g and h default to the identity (orthonormal frames)."""
    n, m = dphi.shape
    ginv = np.eye(m) if ginv is None else ginv
    h = np.eye(n) if h is None else h
    return q_contractions(ginv, np.zeros((m, m)), h, riemann_target, dphi).split(K)[1]


def map_contractions(phi: MapModel, point: np.ndarray) -> QContractions:
    point = np.asarray(point, dtype=float)
    image = evaluate(phi, point)
    source = curvature_bundle(phi.source, point, phi.source_chart)
    target = curvature_bundle(phi.target, image, phi.target_chart)
    return q_contractions(source.inverse_metric, source.ricci, target.metric, target.riemann,
                          differential(phi, point))


# ---------------------------------------------------------------------
# Q and its split for a map
# ---------------------------------------------------------------------
def q_term(phi: MapModel, point: np.ndarray) -> float:
    return map_contractions(phi, point).q()


def q_split(phi: MapModel, point: np.ndarray, K: float) -> Tuple[float, float]:
    """(Q0, Q1) for the bound K; Q0 + Q1 = Q for every K."""
    return map_contractions(phi, point).split(K)


def q1_frame_form(phi: MapModel, point: np.ndarray, K: float,
                  frame: Optional[np.ndarray] = None) -> Tuple[float, FrameData]:
    data = build_frame_data(phi, point, frame)
    return q1_frame_value(data.c, data.kappa, K), data


# ---------------------------------------------------------------------
# Q1 as a polynomial in (c, kappa, K)
# ---------------------------------------------------------------------
def q1_frame_value(c: np.ndarray, kappa: np.ndarray, K: float) -> float:
    """(m-1) K sum_ij c_ij^2 - sum_ij kappa_ij (c_ii c_jj - c_ij^2)."""
    c = np.asarray(c, dtype=float)
    m = c.shape[0]
    d = np.diag(c)
    minors = np.outer(d, d) - c ** 2
    return float((m - 1) * K * np.sum(c ** 2) - np.sum(np.asarray(kappa, dtype=float) * minors))


def q1_pair_term(c_ii: float, c_jj: float, c_ij: float, kappa_ij: float, K: float, m: int) -> float:
    """K (c_ii - c_jj)^2 + 2 (K - kappa_ij) c_ii c_jj + 2 ((m-1) K + kappa_ij) c_ij^2."""
    return (K * (c_ii - c_jj) ** 2
            + 2.0 * (K - kappa_ij) * c_ii * c_jj
            + 2.0 * ((m - 1) * K + kappa_ij) * c_ij ** 2)


def q1_summands(c: np.ndarray, kappa: np.ndarray, K: float) -> np.ndarray:
    """Strictly upper-triangular matrix of pair terms; zero on and below the diagonal."""
    c = np.asarray(c, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    m = c.shape[0]
    d = np.diag(c)
    terms = q1_pair_term(d[:, None], d[None, :], c, kappa, K, m)
    return np.triu(terms, k=1)


def q1_sum_form(c: np.ndarray, kappa: np.ndarray, K: float) -> float:
    return float(np.sum(q1_summands(c, kappa, K)))


# ---------------------------------------------------------------------
# Single-point report
# ---------------------------------------------------------------------
def bochner_report(phi: MapModel, point: np.ndarray, K: float = 0.0,
                   laplacian_energy: Optional[float] = None) -> BochnerReport:
    """Pointwise Bochner terms; the residual is filled in only when the grid Laplacian is supplied."""
    point = np.asarray(point, dtype=float)
    contractions = map_contractions(phi, point)
    q0, q1 = contractions.split(K)
    sff = second_fundamental_form(phi, point)
    energy = energy_density(phi, point)
    residual = None
    if laplacian_energy is not None:
        residual = 0.5 * laplacian_energy - sff.norm_sq - contractions.q()
    report = BochnerReport(
        point=point.tolist(),
        energy_density=energy,
        sff_norm_sq=sff.norm_sq,
        q=contractions.q(),
        q0=q0,
        q1=q1,
        K=float(K),
        laplacian_energy=laplacian_energy,
        residual=residual,
    )
    logger.debug(f"Bochner terms at {point.tolist()}: |dphi|^2={energy:.6g} Q={report.q:.6g}")
    return report
