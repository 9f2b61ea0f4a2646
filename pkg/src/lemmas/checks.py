"""
checks.py
---------
Pointwise sign lemmas on algebraic data in orthonormal frames (g = I on R^m, h = I on R^n).

 - Q0 = <A, phi*h> is non-negative for positive semidefinite A
 - Q1 is non-negative whenever sec <= K with K >= 0, summand by summand
 - the equality case Q1 = 0 forces sec = K on the image and, for K > 0, either a
   conformal differential or a zero differential
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from bochner.engine import q1_contraction, q1_frame_value, q1_sum_form, q1_summands
from bochner.frames import frame_data_from_arrays
from lemmas.sampling import algebraic_sectional
from utils.logger_config import get_logger

logger = get_logger(__name__)

Q1_EQUALITY_TOL = 1e-9
CONFORMAL_TOL = 1e-8
RANK_TOL = 1e-8
N_SPAN_PLANES = 1000


# ---------------------------------------------------------------------
# Q0
# ---------------------------------------------------------------------
def q0_eigen_form(A: np.ndarray, dphi: np.ndarray) -> float:
    """sum_i a_i |dphi(u_i)|^2 over an eigenbasis {u_i} of A."""
    a, U = np.linalg.eigh(0.5 * (A + A.T))
    images = dphi @ U
    return float(np.sum(a * np.sum(images * images, axis=0)))


def q0_forms(A: np.ndarray, dphi: np.ndarray) -> Tuple[float, float]:
    """(contraction <A, phi*h>, eigen-decomposition form)."""
    A = np.asarray(A, dtype=float)
    dphi = np.asarray(dphi, dtype=float)
    contraction = float(np.sum(A * (dphi.T @ dphi)))
    return contraction, q0_eigen_form(A, dphi)


def q0_value(A: np.ndarray, dphi: np.ndarray) -> float:
    contraction, eigen = q0_forms(A, dphi)
    scale = max(1.0, float(np.sum(np.abs(A))) * float(np.sum(dphi * dphi)))
    if abs(contraction - eigen) > 1e-12 * scale:
        logger.warning(f"Q0 forms disagree: contraction {contraction:.17g} vs eigen {eigen:.17g}")
    return contraction


# ---------------------------------------------------------------------
# Q1
# ---------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Q1Breakdown:
    value: float  # direct contraction
    sum_form: float
    frame_value: float
    summands: np.ndarray  # strictly upper triangular
    c: np.ndarray
    kappa: np.ndarray
    K: float
    plane_choices: Dict[str, str] = field(default_factory=dict)

    @property
    def min_summand(self) -> float:
        m = self.c.shape[0]
        if m < 2:
            return 0.0
        return float(np.min(self.summands[np.triu_indices(m, k=1)]))

    @property
    def forms_gap(self) -> float:
        return max(abs(self.value - self.sum_form), abs(self.value - self.frame_value))


def q1_value(dphi: np.ndarray, R: np.ndarray, K: float) -> Q1Breakdown:
    """Q1 by direct contraction, cross-checked against the frame and sum forms on (c, kappa)."""
    dphi = np.asarray(dphi, dtype=float)
    n, m = dphi.shape
    data = frame_data_from_arrays(dphi, np.eye(m), np.eye(n), R, frame=np.eye(m))
    value = q1_contraction(dphi, R, K)
    breakdown = Q1Breakdown(
        value=value,
        sum_form=q1_sum_form(data.c, data.kappa, K),
        frame_value=q1_frame_value(data.c, data.kappa, K),
        summands=q1_summands(data.c, data.kappa, K),
        c=data.c,
        kappa=data.kappa,
        K=float(K),
        plane_choices=data.plane_choices,
    )
    scale = max(1.0, float(np.sum(data.c ** 2)) * max(1.0, abs(K), float(np.max(np.abs(R)))))
    if breakdown.forms_gap > 1e-10 * scale:
        logger.warning(f"Q1 forms disagree by {breakdown.forms_gap:.3e} (value {value:.6g})")
    return breakdown


def chain_margins(breakdown: Q1Breakdown) -> Dict[str, float]:
    """
    Smallest slack of the two termwise lower bounds: summand >= -2 kappa (c_ii c_jj - c_ij^2)
    where kappa <= 0 and summand >= 2 (K - kappa) c_ii c_jj where kappa > 0; +inf when no pair applies.
    """
    c, kappa, terms, K = breakdown.c, breakdown.kappa, breakdown.summands, breakdown.K
    m = c.shape[0]
    d = np.diag(c)
    nonpositive, positive = np.inf, np.inf
    for i in range(m):
        for j in range(i + 1, m):
            if kappa[i, j] <= 0.0:
                bound = -2.0 * kappa[i, j] * (d[i] * d[j] - c[i, j] ** 2)
                nonpositive = min(nonpositive, terms[i, j] - bound)
            else:
                bound = 2.0 * (K - kappa[i, j]) * d[i] * d[j]
                positive = min(positive, terms[i, j] - bound)
    return {"nonpositive_kappa": float(nonpositive), "positive_kappa": float(positive)}


# ---------------------------------------------------------------------
# Equality cases
# ---------------------------------------------------------------------
class EqualityCase(str, Enum):
    RANK_GE2_CONST_CURV_K = "RankGe2_ConstCurvK"
    RANK_LE1 = "RankLe1"
    NOT_EQUALITY = "NotEquality"


class EqualitySub(str, Enum):
    CONFORMAL_AT_POINT = "ConformalAtPoint"
    ZERO_DIFFERENTIAL = "ZeroDifferential"
    NONE = "None"


@dataclass(frozen=True)
class EqualityVerdict:
    case: EqualityCase
    sub: EqualitySub
    mu_estimate: Optional[float]
    rank: int
    residuals: Dict[str, float] = field(default_factory=dict)


def differential_rank(dphi: np.ndarray, rel_tol: float = RANK_TOL) -> int:
    singular = np.linalg.svd(np.asarray(dphi, dtype=float), compute_uv=False)
    if singular.size == 0 or singular[0] == 0.0:
        return 0
    return int(np.sum(singular > rel_tol * singular[0]))


def classify_equality_case(dphi: np.ndarray, R: np.ndarray, K: float, tol: float = Q1_EQUALITY_TOL,
                           conformal_tol: float = CONFORMAL_TOL, seed: int = 0,
                           n_planes: int = N_SPAN_PLANES) -> EqualityVerdict:
    """Which equality case of the Q1 lemma a point realizes, if any."""
    dphi = np.asarray(dphi, dtype=float)
    q1 = q1_value(dphi, R, K)
    rank = differential_rank(dphi)
    residuals = {"q1": q1.value}

    if abs(q1.value) > tol:
        logger.debug(f"Not an equality case: Q1 = {q1.value:.3e} > {tol:.1e}")
        return EqualityVerdict(EqualityCase.NOT_EQUALITY, EqualitySub.NONE, None, rank, residuals)

    if rank >= 2:
        rng = np.random.default_rng(seed)
        m = dphi.shape[1]
        xs = rng.normal(size=(n_planes, m)) @ dphi.T
        ys = rng.normal(size=(n_planes, m)) @ dphi.T
        values = algebraic_sectional(R, xs, ys)
        deviation = float(np.nanmax(np.abs(values - K)))
        residuals["sec_deviation"] = deviation
        if deviation > conformal_tol * max(1.0, abs(K)):
            return EqualityVerdict(EqualityCase.NOT_EQUALITY, EqualitySub.NONE, None, rank, residuals)
        if K <= 0.0:
            return EqualityVerdict(EqualityCase.RANK_GE2_CONST_CURV_K, EqualitySub.NONE, None, rank, residuals)

        mu = float(np.trace(q1.c)) / m
        conformal = float(np.linalg.norm(q1.c - mu * np.eye(m), 2))
        residuals["conformal"] = conformal
        if conformal > conformal_tol * max(1.0, mu):
            return EqualityVerdict(EqualityCase.NOT_EQUALITY, EqualitySub.NONE, None, rank, residuals)
        return EqualityVerdict(EqualityCase.RANK_GE2_CONST_CURV_K, EqualitySub.CONFORMAL_AT_POINT, mu, rank, residuals)

    norm = float(np.linalg.norm(dphi, 2)) if dphi.size else 0.0
    residuals["dphi_norm"] = norm
    if K > 0.0:
        if norm <= tol:
            return EqualityVerdict(EqualityCase.RANK_LE1, EqualitySub.ZERO_DIFFERENTIAL, 0.0, rank, residuals)
        return EqualityVerdict(EqualityCase.NOT_EQUALITY, EqualitySub.NONE, None, rank, residuals)
    return EqualityVerdict(EqualityCase.RANK_LE1, EqualitySub.NONE, None, rank, residuals)
