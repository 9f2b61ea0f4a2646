"""
sampling.py
-----------
Synthetic pointwise data for the sign lemmas: algebraic curvature tensors on R^n (with the
Euclidean inner product), upper bounds for their sectional curvatures, and random
differentials in orthonormal frames.

Algebraic curvature tensors are sums of Kulkarni-Nomizu squares of symmetric matrices,
so every symmetry and the first Bianchi identity hold exactly by construction. Bounded
samples are shifted by a multiple of G_ijkl = d_ik d_jl - d_il d_jk, which moves every
sectional value by the same constant.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from utils.logger_config import get_logger

logger = get_logger(__name__)

BOUND_MARGIN = 1e-6
N_PLANES = 1000
ASCENT_STEPS = 50
ASCENT_RESTARTS = 4


@dataclass(frozen=True, eq=False)
class LemmaSample:
    m: int
    n: int
    dphi: np.ndarray  # n x m, orthonormal frames on both sides
    A: np.ndarray  # m x m symmetric
    R: np.ndarray  # algebraic curvature tensor on R^n
    K: float
    seed: int
    sec_bounded: bool = False
    h_frame: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.h_frame is None:
            object.__setattr__(self, "h_frame", np.eye(self.n))

    def to_dict(self) -> dict:
        """Full serialization, used for violation witnesses."""
        return {
            "m": self.m,
            "n": self.n,
            "K": self.K,
            "seed": self.seed,
            "sec_bounded": self.sec_bounded,
            "dphi": self.dphi.tolist(),
            "A": self.A.tolist(),
            "R": self.R.tolist(),
        }


# ---------------------------------------------------------------------
# Algebraic curvature tensors
# ---------------------------------------------------------------------
def constant_curvature_tensor(n: int, K: float = 1.0) -> np.ndarray:
    """K * G; every 2-plane has sectional curvature exactly K."""
    eye = np.eye(n)
    G = np.einsum("ik,jl->ijkl", eye, eye) - np.einsum("il,jk->ijkl", eye, eye)
    return K * G


def kulkarni_nomizu_square(S: np.ndarray) -> np.ndarray:
    """(S o S)/2 = S_ik S_jl - S_il S_jk for symmetric S."""
    return np.einsum("ik,jl->ijkl", S, S) - np.einsum("il,jk->ijkl", S, S)


def random_algebraic_curvature(n: int, rng: np.random.Generator, terms: int = 3) -> np.ndarray:
    """Signed sum of Kulkarni-Nomizu squares of random symmetric matrices."""
    R = np.zeros((n, n, n, n))
    for _ in range(terms):
        B = rng.normal(size=(n, n)) / np.sqrt(n)
        sign = rng.choice((-1.0, 1.0))
        R += sign * kulkarni_nomizu_square(0.5 * (B + B.T))
    return R


def algebraic_sectional(R: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Euclidean sectional values for rows of xs, ys; degenerate planes give nan."""
    xs, ys = np.atleast_2d(xs), np.atleast_2d(ys)
    num = np.einsum("abcd,na,nb,nc,nd->n", R, xs, ys, xs, ys, optimize=True)
    xx, yy, xy = np.sum(xs * xs, axis=1), np.sum(ys * ys, axis=1), np.sum(xs * ys, axis=1)
    gram = xx * yy - xy ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        values = num / gram
    return np.where(gram >= 1e-12 * xx * yy, values, np.nan)


def _orthonormal_pair(x: np.ndarray, y: np.ndarray):
    q, _ = np.linalg.qr(np.stack([x, y], axis=1))
    return q[:, 0], q[:, 1]


def _ascend(R: np.ndarray, x: np.ndarray, y: np.ndarray, steps: int, step: float = 0.2) -> float:
    """Projected gradient ascent of R(X, Y, X, Y) over orthonormal pairs."""
    x, y = _orthonormal_pair(x, y)
    value = float(np.einsum("abcd,a,b,c,d->", R, x, y, x, y))
    for _ in range(steps):
        grad_x = 2.0 * np.einsum("abcd,b,c,d->a", R, y, x, y)
        grad_y = 2.0 * np.einsum("abcd,a,b,c->d", R, x, y, x)
        # Tangent to the Grassmannian: remove components inside the plane.
        grad_x -= (grad_x @ x) * x + (grad_x @ y) * y
        grad_y -= (grad_y @ x) * x + (grad_y @ y) * y
        cx, cy = _orthonormal_pair(x + step * grad_x, y + step * grad_y)
        candidate = float(np.einsum("abcd,a,b,c,d->", R, cx, cy, cx, cy))
        if candidate > value:
            x, y, value = cx, cy, candidate
        else:
            step *= 0.5
            if step < 1e-12:
                break
    return value


def max_sectional(R: np.ndarray, rng: np.random.Generator, n_planes: int = N_PLANES,
                  ascent_steps: int = ASCENT_STEPS, restarts: int = ASCENT_RESTARTS) -> float:
    """Estimate of the largest sectional value: dense random planes, then ascent from the best few."""
    n = R.shape[0]
    if n < 2:
        raise ValueError("Sectional curvature needs n >= 2")
    if n == 2:
        return float(R[0, 1, 0, 1])
    xs, ys = rng.normal(size=(n_planes, n)), rng.normal(size=(n_planes, n))
    values = algebraic_sectional(R, xs, ys)
    order = np.argsort(np.nan_to_num(values, nan=-np.inf))[::-1][:restarts]
    best = float(np.nanmax(values))
    for k in order:
        best = max(best, _ascend(R, xs[k], ys[k], ascent_steps))
    return best


def curvature_operator(R: np.ndarray) -> np.ndarray:
    """Matrix of the curvature operator on the bivectors e_i ^ e_j, i < j."""
    n = R.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    index_i = np.array([p[0] for p in pairs])
    index_j = np.array([p[1] for p in pairs])
    return R[index_i[:, None], index_j[:, None], index_i[None, :], index_j[None, :]]


def curvature_operator_bound(R: np.ndarray) -> float:
    """Largest eigenvalue of the curvature operator; bounds every sectional value from above."""
    op = curvature_operator(R)
    return float(np.linalg.eigvalsh(0.5 * (op + op.T))[-1])


def sample_curvature_with_bound(n: int, K: float, seed: int, margin: float = BOUND_MARGIN,
                                method: str = "ascent", rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Algebraic curvature tensor with sec <= K.

    method="ascent" shifts by the sampled-plus-ascent estimate of the maximum;
    method="operator" shifts by the curvature-operator bound, which over-shifts but is certified.
    """
    if n < 2:
        raise ValueError(f"Need n >= 2 for sectional curvature, got {n}")
    rng = np.random.default_rng(seed) if rng is None else rng
    R0 = random_algebraic_curvature(n, rng)
    if method == "ascent":
        top = max_sectional(R0, rng)
    elif method == "operator":
        top = curvature_operator_bound(R0)
    else:
        raise ValueError(f"Unknown bounding method: {method}")
    logger.debug(f"Curvature sample n={n} seed={seed}: max sec estimate {top:.6g}, "
                 f"operator bound {curvature_operator_bound(R0):.6g}")
    return R0 - (top - K + margin) * constant_curvature_tensor(n, 1.0)


# ---------------------------------------------------------------------
# Differentials and symmetric forms
# ---------------------------------------------------------------------
def random_differential(n: int, m: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    """Standard normal n x m matrix, truncated to the requested rank by SVD."""
    dphi = rng.normal(size=(n, m))
    if rank is None or rank >= min(n, m):
        return dphi
    u, s, vt = np.linalg.svd(dphi, full_matrices=False)
    s[rank:] = 0.0
    return (u * s) @ vt


def random_psd(m: int, rng: np.random.Generator) -> np.ndarray:
    B = rng.normal(size=(m, m))
    return B @ B.T


def conformal_differential(n: int, m: int, mu: float, rng: np.random.Generator) -> np.ndarray:
    """sqrt(mu) times an n x m matrix with orthonormal columns (n >= m)."""
    if n < m:
        raise ValueError("A conformal differential needs n >= m")
    q, _ = np.linalg.qr(rng.normal(size=(n, m)))
    return np.sqrt(mu) * q


def make_lemma_sample(m: int, n: int, K: float, seed: int, rank: Optional[int] = None,
                      R: Optional[np.ndarray] = None) -> LemmaSample:
    """Self-contained sample reproducible from (m, n, K, seed, rank); R defaults to a bounded draw."""
    rng = np.random.default_rng(seed)
    bounded = R is None
    if bounded:
        R = sample_curvature_with_bound(n, K, seed, method="operator", rng=rng)
    return LemmaSample(
        m=m,
        n=n,
        dphi=random_differential(n, m, rng, rank),
        A=random_psd(m, rng),
        R=np.asarray(R, dtype=float),
        K=float(K),
        seed=seed,
        sec_bounded=bounded,
    )
