"""Free space in world coordinates: road-labeled pixels back-projected onto
the fitted road plane, plus a tinted overlay raster for visual checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crf import LabelMask
from .geometry import CameraModel, PoseSE3, RoadPlane, pixel_ray_grid, plane_t_grid

DEFAULT_STRIDE = 2
DEFAULT_T_MAX = 60.0


@dataclass(frozen=True)
class FreeSpaceCloud:
    """World-frame points on the road plane, row-major in pixel order."""

    points: np.ndarray
    frame_id: int = 0

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError(
                f"expected an Nx3 point array, got shape {self.points.shape}")


def backproject_mask(mask: LabelMask, cam: CameraModel, pose: PoseSE3,
                     plane: RoadPlane, stride: int = DEFAULT_STRIDE,
                     t_max: float = DEFAULT_T_MAX,
                     frame_id: int = 0) -> FreeSpaceCloud:
    """Intersect every stride-th road pixel's ray with the road plane.

    Rays that run parallel to the plane, away from it, or farther than t_max
    contribute nothing. Points come out in row-major pixel order.
    """
    if stride < 1:
        raise ValueError("stride must be at least 1")
    if (mask.height, mask.width) != (cam.height, cam.width):
        raise ValueError("mask dimensions do not match the camera")
    origin, dirs = pixel_ray_grid(cam, pose)
    t = plane_t_grid(origin, dirs, plane)
    sel = mask.road & np.isfinite(t) & (t <= t_max)
    sel[np.arange(cam.height) % stride != 0, :] = False
    sel[:, np.arange(cam.width) % stride != 0] = False
    ts = t[sel]
    points = origin[None, :] + ts[:, None] * dirs[sel]
    return FreeSpaceCloud(points=points, frame_id=frame_id)


def export_overlay(image: np.ndarray, mask: LabelMask, tint) -> np.ndarray:
    """Alpha-blend (0.5) the tint color over road pixels."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("expected an HxWx3 uint8 image")
    if img.shape[:2] != (mask.height, mask.width):
        raise ValueError("image and mask dimensions disagree")
    tint = np.asarray(tint, dtype=np.float64)
    out = img.copy()
    blended = ((img[mask.road].astype(np.float64) + tint) * 0.5).astype(np.uint8)
    out[mask.road] = blended
    return out
