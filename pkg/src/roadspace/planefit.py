"""Road-plane fitting: grid search in (pitch, height) parameter space.

The road plane in the camera frame is z*sin(theta) - y*cos(theta) = d*cos(theta)
with pitch theta and camera height d above the road. The search scores each
(theta, d) grid cell by the number of points whose algebraic residual
|z*sin(theta) - y*cos(theta) - d*cos(theta)| falls within a tolerance, which is
robust to the outlier fraction a sparse multi-view reconstruction carries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoPlaneFound


@dataclass(frozen=True)
class PlaneSearchConfig:
    """Grid bounds and acceptance thresholds for the plane search.

    d_init is the known camera mount height; the search covers
    d_init +/- d_window. Defaults encode a small-pitch forward camera at
    roughly head height.
    """

    theta_min: float = -0.15
    theta_max: float = 0.15
    theta_step: float = 0.005
    d_init: float = 1.6
    d_window: float = 0.5
    d_step: float = 0.02
    inlier_tol: float = 0.05
    min_inliers: int = 100

    def __post_init__(self):
        if not (self.theta_step > 0 and self.d_step > 0 and self.inlier_tol > 0):
            raise ValueError("theta_step, d_step and inlier_tol must be positive")
        if not self.theta_min < self.theta_max:
            raise ValueError("need theta_min < theta_max")
        if self.d_window < 0:
            raise ValueError("d_window must be non-negative")

    def theta_grid(self) -> np.ndarray:
        n = int(round((self.theta_max - self.theta_min) / self.theta_step)) + 1
        return self.theta_min + np.arange(n) * self.theta_step

    def d_grid(self) -> np.ndarray:
        n = int(round(2.0 * self.d_window / self.d_step)) + 1
        return (self.d_init - self.d_window) + np.arange(n) * self.d_step


@dataclass(frozen=True)
class PlaneFitResult:
    theta: float
    dist: float
    inlier_count: int
    inlier_indices: np.ndarray

    def __post_init__(self):
        if self.inlier_count != len(self.inlier_indices):
            raise ValueError("inlier_count must match inlier_indices length")


def _residuals(points: np.ndarray, theta: float, d: float) -> np.ndarray:
    st, ct = math.sin(theta), math.cos(theta)
    return points[:, 2] * st - points[:, 1] * ct - d * ct


def fit_plane_hough(points, cfg: PlaneSearchConfig) -> PlaneFitResult:
    """Fit the road plane by exhaustive (theta, d) grid scoring.

    Returns the cell with the most inliers; ties break to the smallest theta,
    then the smallest d. Raises NoPlaneFound when the best cell has fewer than
    cfg.min_inliers supporters.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise ValueError(f"expected a non-empty Nx3 array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")

    thetas = cfg.theta_grid()
    ds = cfg.d_grid()
    tol = cfg.inlier_tol

    best_count = -1
    best_theta = thetas[0]
    best_d = ds[0]
    # per theta, a = z*sin - y*cos is fixed; counting |a - d*cos| <= tol over the
    # d row reduces to window counts on sorted a
    for theta in thetas:
        st, ct = math.sin(theta), math.cos(theta)
        a = np.sort(pts[:, 2] * st - pts[:, 1] * ct)
        centers = ds * ct
        lo = np.searchsorted(a, centers - tol, side="left")
        hi = np.searchsorted(a, centers + tol, side="right")
        counts = hi - lo
        j = int(np.argmax(counts))  # argmax takes the first max: smallest d wins ties
        if counts[j] > best_count:  # strict: earlier (smaller) theta wins ties
            best_count = int(counts[j])
            best_theta = float(theta)
            best_d = float(ds[j])

    if best_count < cfg.min_inliers:
        raise NoPlaneFound(
            f"best cell has {best_count} inliers, need {cfg.min_inliers}")
    idx = np.nonzero(np.abs(_residuals(pts, best_theta, best_d)) <= tol)[0]
    return PlaneFitResult(theta=best_theta, dist=best_d,
                          inlier_count=len(idx), inlier_indices=idx)


def refine_plane_ls(points, result: PlaneFitResult,
                    cfg: PlaneSearchConfig) -> PlaneFitResult:
    """Least-squares polish of a grid cell over its inlier set.

    Minimizes the summed squared plane residual in closed form: with centered
    inlier coordinates, the optimum pitch satisfies tan(2*theta) = -2B/(C - A)
    for A = sum(dz^2), B = sum(dz*dy), C = sum(dy^2), and the optimal height at
    fixed pitch is d = tan(theta)*mean(z) - mean(y). Inliers are then recounted
    at cfg.inlier_tol. Returns the input unchanged when the inlier geometry is
    degenerate or the polish does not help.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(result.inlier_indices) == 0:
        raise ValueError("refinement needs a non-empty inlier set")
    sel = pts[result.inlier_indices]
    if sel.shape[0] < 3:
        return result

    y = sel[:, 1]
    z = sel[:, 2]
    dy = y - y.mean()
    dz = z - z.mean()
    A = float(dz @ dz)
    B = float(dz @ dy)
    C = float(dy @ dy)
    if A + C <= 1e-18 or (B == 0.0 and A == C):
        return result  # single point or isotropic scatter: pitch undefined

    half = 0.5 * math.atan2(-2.0 * B, C - A)
    candidates = [half, half + math.pi / 2.0]

    def objective(theta):
        return (A + C) / 2.0 + math.cos(2.0 * theta) * (C - A) / 2.0 \
            - math.sin(2.0 * theta) * B

    theta_ref = min(candidates, key=objective)
    if theta_ref > math.pi / 2.0:
        theta_ref -= math.pi
    ct = math.cos(theta_ref)
    if not (abs(theta_ref) < math.pi / 2.0 and ct > 0.0):
        return result
    d_ref = math.tan(theta_ref) * float(z.mean()) - float(y.mean())
    if d_ref <= 0.0:
        return result

    # polish must not lose ground on the set it was fit to
    old_sum = float(np.sum(_residuals(sel, result.theta, result.dist) ** 2))
    new_sum = float(np.sum(_residuals(sel, theta_ref, d_ref) ** 2))
    if new_sum > old_sum:
        return result

    idx = np.nonzero(np.abs(_residuals(pts, theta_ref, d_ref)) <= cfg.inlier_tol)[0]
    if len(idx) < cfg.min_inliers:
        return result
    return PlaneFitResult(theta=theta_ref, dist=d_ref,
                          inlier_count=len(idx), inlier_indices=idx)
