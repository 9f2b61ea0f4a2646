"""
linalg.py
---------
Small linear-algebra helpers shared by the geometry, map and report layers.

 - metric conditioning checks
 - g-orthonormal frames (modified Gram-Schmidt with pivoting)
 - symmetric generalized eigenvalues and operator norms measured against a metric
"""

import numpy as np
from scipy import linalg as sla

from utils.errors import ConditioningError

# Condition numbers above this make second derivatives of the metric meaningless.
CONDITION_THRESHOLD = 1e8


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return the symmetric part of a square matrix."""
    return 0.5 * (a + a.T)


def check_conditioning(g: np.ndarray, threshold: float = CONDITION_THRESHOLD) -> float:
    """Raise ConditioningError when cond(g) exceeds threshold; return the condition number."""
    eigenvalues = np.linalg.eigvalsh(g)
    smallest, largest = eigenvalues[0], eigenvalues[-1]
    if smallest <= 0.0:
        raise ConditioningError(f"Metric is not positive definite (smallest eigenvalue {smallest:.3e})")
    condition = largest / smallest
    if condition > threshold:
        raise ConditioningError(f"Metric condition number {condition:.3e} exceeds {threshold:.1e}")
    return float(condition)


def generalized_eigenvalues(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Eigenvalues of the symmetric pencil a - t b, with b positive definite, ascending."""
    return sla.eigh(symmetrize(a), symmetrize(b), eigvals_only=True)


def operator_norm(a: np.ndarray, b: np.ndarray) -> float:
    """Operator norm of the symmetric form a measured against the metric b."""
    return float(np.max(np.abs(generalized_eigenvalues(a, b))))


def inner(g: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    return float(x @ g @ y)


def orthonormal_frame(g: np.ndarray, tiny: float = 1e-14) -> np.ndarray:
    """
    Columns form a g-orthonormal basis built from the coordinate basis.

    Modified Gram-Schmidt; at every stage the remaining vector with the largest g-norm
    is taken next, so the result is deterministic for a given g.
    """
    m = g.shape[0]
    remaining = [np.eye(m)[:, k] for k in range(m)]
    frame = np.zeros((m, m))
    scale = np.max(np.abs(np.diag(g)))
    for k in range(m):
        norms = [np.sqrt(max(inner(g, v, v), 0.0)) for v in remaining]
        pivot = int(np.argmax(norms))
        if norms[pivot] <= tiny * np.sqrt(scale):
            raise ConditioningError("Cannot build an orthonormal frame: metric is numerically degenerate")
        e = remaining.pop(pivot) / norms[pivot]
        frame[:, k] = e
        remaining = [v - inner(g, e, v) * e for v in remaining]
    return frame


def orthonormal_differential(dphi: np.ndarray, g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """
    The matrix of dphi between g-orthonormal source and h-orthonormal target frames.

    With g = Lg Lg^T and h = Lh Lh^T this is Lh^T dphi Lg^{-T}; its singular values are
    chart independent.
    """
    lower_g = sla.cholesky(symmetrize(g), lower=True)
    lower_h = sla.cholesky(symmetrize(h), lower=True)
    right = sla.solve_triangular(lower_g, dphi.T @ lower_h, lower=True)
    return right.T
