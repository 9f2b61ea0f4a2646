"""
frames.py
---------
Orthonormal-frame data for the curvature part of the Bochner identity.

Given a g-orthonormal frame {e_i} at a source point, the images Y_i = dphi(e_i) have
Gram matrix c_ij = h(Y_i, Y_j) and plane curvatures kappa_ij = sec_h(span{Y_i, Y_j}).
When Y_i and Y_j are dependent the plane is completed deterministically and the choice
is recorded; every quantity built on kappa_ij is independent of it because the
coefficient c_ii c_jj - c_ij^2 vanishes.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from geometry.curvature import PLANE_DEGENERACY, curvature_bundle, sectional_from_tensor
from geometry.linalg import inner, orthonormal_frame
from geometry.manifolds import metric_at
from maps.calculus import differential, evaluate
from maps.models import MapModel
from utils.logger_config import get_logger

logger = get_logger(__name__)

# Images whose squared h-norm is below this fraction of the largest c_ii count as zero.
ZERO_IMAGE_TOL = 1e-24


@dataclass(frozen=True, eq=False)
class FrameData:
    frame: np.ndarray  # columns e_i, g-orthonormal
    images: np.ndarray  # columns Y_i = dphi(e_i), target coordinates
    c: np.ndarray
    kappa: np.ndarray  # symmetric, zero diagonal
    plane_choices: Dict[str, str] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.c.shape[0]


def _complete_plane(u: np.ndarray, h: np.ndarray, threshold: float):
    """First coordinate vector e_k with a nonzero h-orthogonal component to u; (k, v) with v that component."""
    n = h.shape[0]
    uu = inner(h, u, u)
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        v = e - inner(h, u, e) / uu * u
        vv = inner(h, v, v)
        if vv > threshold * inner(h, e, e):
            return k, v
    return None, None


def plane_curvatures(images: np.ndarray, h: np.ndarray, riemann_target: np.ndarray):
    """(c, kappa, plane_choices) for image columns Y_i in a target with metric h and curvature R^N."""
    n, m = images.shape
    c = images.T @ h @ images
    c = 0.5 * (c + c.T)
    kappa = np.zeros((m, m))
    choices: Dict[str, str] = {}
    scale = float(np.max(np.diag(c))) if m else 0.0
    zero = ZERO_IMAGE_TOL * scale if scale > 0.0 else 0.0

    for i in range(m):
        for j in range(i + 1, m):
            key = f"{i},{j}"
            if n < 2:
                choices[key] = "none"
                continue
            yi, yj = images[:, i], images[:, j]
            cii, cjj, cij = c[i, i], c[j, j], c[i, j]
            if cii > zero and cjj > zero and cii * cjj - cij ** 2 >= PLANE_DEGENERACY * cii * cjj:
                kappa[i, j] = sectional_from_tensor(riemann_target, h, yi, yj)
                choices[key] = "span"
                continue

            if cii > zero or cjj > zero:
                base, label = (yi, f"Y{i}") if cii >= cjj else (yj, f"Y{j}")
            else:
                base, label = np.eye(n)[:, 0], "e0"
            k, v = _complete_plane(base, h, PLANE_DEGENERACY)
            kappa[i, j] = sectional_from_tensor(riemann_target, h, base, v)
            choices[key] = f"completed:{label}+e{k}"
            logger.debug(f"Plane ({i},{j}) completed as {label} + e{k}")
    kappa = kappa + kappa.T
    return c, kappa, choices


def frame_data_from_arrays(dphi: np.ndarray, g: np.ndarray, h: np.ndarray, riemann_target: np.ndarray,
                           frame: Optional[np.ndarray] = None) -> FrameData:
    """FrameData for a bare differential: dphi is n x m, g and h the metrics at the two points."""
    frame = orthonormal_frame(g) if frame is None else np.asarray(frame, dtype=float)
    images = dphi @ frame
    c, kappa, choices = plane_curvatures(images, h, riemann_target)
    return FrameData(frame=frame, images=images, c=c, kappa=kappa, plane_choices=choices)


def build_frame_data(phi: MapModel, point: np.ndarray, frame: Optional[np.ndarray] = None) -> FrameData:
    """FrameData of phi at a source chart point, optionally in a caller-supplied g-orthonormal frame."""
    point = np.asarray(point, dtype=float)
    image = evaluate(phi, point)
    g = metric_at(phi.source, point, phi.source_chart)
    target = curvature_bundle(phi.target, image, phi.target_chart)
    return frame_data_from_arrays(differential(phi, point), g, target.metric, target.riemann, frame)
