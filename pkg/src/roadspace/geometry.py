"""Geometric primitives: pinhole camera, SE(3) poses, road plane, oriented boxes, rays.

Conventions used everywhere in this package:
  camera frame: x right, y up, z forward along the principal axis
  pixel (u, v): camera-frame direction ((u - cx) / fx, (v - cy) / fy, 1)
  pose (R, t):  world-from-camera, X_world = R @ X_cam + t

With y up, the road lies at negative camera y; a level camera at height d sees
the road plane as y = -d.

The grid raycasters mirror the scalar intersection routines operation for
operation so that a vectorized render and a per-pixel loop produce bit-identical
results, which the indicator-map tests rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Rays closer to plane-parallel than this are treated as misses; avoids huge-t
# false hits from near-zero denominators.
PARALLEL_TOL = 1e-12

_ORTHO_TOL = 1e-9
_UNIT_TOL = 1e-12


def _as_vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus image size, all in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class PoseSE3:
    """World-from-camera rigid transform: X_world = rotation @ X_cam + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", _as_vec3(self.translation, "translation"))
        if not np.allclose(rot.T @ rot, np.eye(3), atol=_ORTHO_TOL, rtol=0.0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation must have determinant +1")

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls(np.eye(3), np.zeros(3))

    def compose(self, other: "PoseSE3") -> "PoseSE3":
        """self applied after other: (self . other) @ X = self @ (other @ X)."""
        return PoseSE3(self.rotation @ other.rotation,
                       self.rotation @ other.translation + self.translation)

    def inverse(self) -> "PoseSE3":
        rt = self.rotation.T.copy()
        return PoseSE3(rt, -(rt @ self.translation))

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply to points, shape (..., 3)."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        """Apply the rotation only, shape (..., 3)."""
        return np.asarray(vectors, dtype=np.float64) @ self.rotation.T


@dataclass(frozen=True)
class RoadPlane:
    """Road plane as (theta, dist) in its keyframe plus the world normal form.

    theta is the angle between the principal axis and the plane, dist the
    camera-center height above it. World-frame points X on the plane satisfy
    normal . X = offset, with the keyframe camera center on the positive side.
    """

    theta: float
    dist: float
    keyframe_pose: PoseSE3
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", _as_vec3(self.normal, "normal"))
        n = self.normal
        if abs(math.sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) - 1.0) > _UNIT_TOL:
            raise ValueError("plane normal must be unit length")
        expected = plane_from_theta_d(self.theta, self.dist, self.keyframe_pose)
        if (np.max(np.abs(expected.normal - n)) > _ORTHO_TOL
                or abs(expected.offset - self.offset) > _ORTHO_TOL):
            raise ValueError("(normal, offset) inconsistent with (theta, dist, keyframe_pose)")

    def signed_height(self, points: np.ndarray) -> np.ndarray:
        """Signed distance above the plane, positive toward the camera side."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.normal - self.offset


@dataclass(frozen=True)
class OrientedBox:
    """Box with orthonormal axes (rows of ``axes``) and positive half extents."""

    center: np.ndarray
    axes: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec3(self.center, "center"))
        axes = np.asarray(self.axes, dtype=np.float64)
        if axes.shape != (3, 3):
            raise ValueError(f"axes must be 3x3, got {axes.shape}")
        object.__setattr__(self, "axes", axes)
        he = _as_vec3(self.half_extents, "half_extents")
        object.__setattr__(self, "half_extents", he)
        if not np.allclose(axes @ axes.T, np.eye(3), atol=_ORTHO_TOL, rtol=0.0):
            raise ValueError("box axes must be orthonormal")
        if not np.all(he > 0):
            raise ValueError("half extents must be positive")

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Membership test for points of shape (..., 3)."""
        rel = np.asarray(points, dtype=np.float64) - self.center
        coords = rel @ self.axes.T
        return np.all(np.abs(coords) <= self.half_extents + tol, axis=-1)


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", _as_vec3(self.origin, "origin"))
        d = _as_vec3(self.direction, "direction")
        object.__setattr__(self, "direction", d)
        if abs(math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) - 1.0) > _UNIT_TOL:
            raise ValueError("ray direction must be unit length")


@dataclass(frozen=True)
class PlaneHit:
    t: float


@dataclass(frozen=True)
class BoxHit:
    t: float
    index: int


@dataclass(frozen=True)
class Miss:
    pass


def pixel_ray(cam: CameraModel, pose: PoseSE3, u: float, v: float) -> Ray:
    """World-frame viewing ray through pixel (u, v)."""
    if not (0 <= u < cam.width and 0 <= v < cam.height):
        raise ValueError(f"pixel ({u}, {v}) outside {cam.width}x{cam.height} image")
    x = (u - cam.cx) / cam.fx
    y = (v - cam.cy) / cam.fy
    r = pose.rotation
    dx = r[0, 0] * x + r[0, 1] * y + r[0, 2]
    dy = r[1, 0] * x + r[1, 1] * y + r[1, 2]
    dz = r[2, 0] * x + r[2, 1] * y + r[2, 2]
    n = math.sqrt(dx * dx + dy * dy + dz * dz)
    return Ray(pose.translation.copy(), np.array([dx / n, dy / n, dz / n]))


def project_point(cam: CameraModel, pose: PoseSE3, point: np.ndarray) -> tuple[float, float]:
    """Project a world point to pixel coordinates. Raises if at or behind the camera."""
    p = _as_vec3(point, "point") - pose.translation
    r = pose.rotation
    xc = r[0, 0] * p[0] + r[1, 0] * p[1] + r[2, 0] * p[2]
    yc = r[0, 1] * p[0] + r[1, 1] * p[1] + r[2, 1] * p[2]
    zc = r[0, 2] * p[0] + r[1, 2] * p[1] + r[2, 2] * p[2]
    if zc <= 0:
        raise ValueError("point is not in front of the camera")
    return cam.fx * xc / zc + cam.cx, cam.fy * yc / zc + cam.cy


def plane_from_theta_d(theta: float, d: float, keyframe_pose: PoseSE3) -> RoadPlane:
    """Build the road plane from its pitch angle and camera height.

    In the keyframe camera frame the plane is z*sin(theta) - y*cos(theta) =
    d*cos(theta); equivalently n_cam . X = c_cam with n_cam = (0, cos, -sin)
    and c_cam = -d*cos, which puts the camera center on the positive side.
    """
    c = math.cos(theta)
    s = math.sin(theta)
    if c <= 0 or not abs(theta) < math.pi / 2:
        raise ValueError(f"plane pitch must satisfy |theta| < pi/2, got {theta}")
    if not d > 0:
        raise ValueError(f"camera height d must be positive, got {d}")
    n_cam = np.array([0.0, c, -s])
    c_cam = -d * c
    n_world = keyframe_pose.rotate(n_cam)
    t = keyframe_pose.translation
    offset = c_cam + (n_world[0] * t[0] + n_world[1] * t[1] + n_world[2] * t[2])
    return _road_plane_unchecked(theta, d, keyframe_pose, n_world, offset)


def _road_plane_unchecked(theta, dist, keyframe_pose, normal, offset) -> RoadPlane:
    # Bypass the consistency recheck (callers guarantee it); keeps construction
    # from plane_from_theta_d non-recursive.
    plane = object.__new__(RoadPlane)
    object.__setattr__(plane, "theta", float(theta))
    object.__setattr__(plane, "dist", float(dist))
    object.__setattr__(plane, "keyframe_pose", keyframe_pose)
    object.__setattr__(plane, "normal", np.asarray(normal, dtype=np.float64))
    object.__setattr__(plane, "offset", float(offset))
    return plane


def plane_in_camera(plane: RoadPlane, pose: PoseSE3) -> tuple[np.ndarray, float]:
    """The plane's (normal, offset) expressed in the camera frame of ``pose``."""
    n = plane.normal
    r = pose.rotation
    n_cam = np.array([
        r[0, 0] * n[0] + r[1, 0] * n[1] + r[2, 0] * n[2],
        r[0, 1] * n[0] + r[1, 1] * n[1] + r[2, 1] * n[2],
        r[0, 2] * n[0] + r[1, 2] * n[1] + r[2, 2] * n[2],
    ])
    t = pose.translation
    c_cam = plane.offset - (n[0] * t[0] + n[1] * t[1] + n[2] * t[2])
    return n_cam, c_cam


def ray_plane_intersect(ray: Ray, plane: RoadPlane):
    """Smallest t > 0 with the ray point on the plane, as (t, point), or None."""
    n = plane.normal
    o = ray.origin
    d = ray.direction
    denom = n[0] * d[0] + n[1] * d[1] + n[2] * d[2]
    if abs(denom) < PARALLEL_TOL:
        return None
    t = (plane.offset - (n[0] * o[0] + n[1] * o[1] + n[2] * o[2])) / denom
    if not (t > 0 and math.isfinite(t)):
        return None
    point = np.array([o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]])
    return float(t), point


def ray_box_intersect(ray: Ray, box: OrientedBox):
    """Entry t > 0 of the ray into the box (exit t when starting inside), or None."""
    o = ray.origin
    d = ray.direction
    c = box.center
    rx = o[0] - c[0]
    ry = o[1] - c[1]
    rz = o[2] - c[2]
    tmin = -math.inf
    tmax = math.inf
    for j in range(3):
        ax = box.axes[j]
        h = box.half_extents[j]
        p = rx * ax[0] + ry * ax[1] + rz * ax[2]
        q = d[0] * ax[0] + d[1] * ax[1] + d[2] * ax[2]
        if q == 0.0:
            # Parallel to this slab: constrains nothing if inside, misses if not.
            if abs(p) > h:
                return None
            continue
        t1 = (-h - p) / q
        t2 = (h - p) / q
        lo = t1 if t1 < t2 else t2
        hi = t2 if t1 < t2 else t1
        if lo > tmin:
            tmin = lo
        if hi < tmax:
            tmax = hi
    if tmax < tmin:
        return None
    if tmin > 0.0:
        return float(tmin)
    if tmax > 0.0:
        return float(tmax)
    return None


def first_hit(ray: Ray, plane: RoadPlane, boxes: list[OrientedBox]):
    """Closest positive-t hit across the plane and all boxes.

    Exact plane/box ties resolve to the box: never claim drivable surface under
    an obstacle edge.
    """
    plane_result = ray_plane_intersect(ray, plane)
    t_plane = plane_result[0] if plane_result is not None else None
    best_t = None
    best_index = -1
    for i, box in enumerate(boxes):
        tb = ray_box_intersect(ray, box)
        if tb is not None and (best_t is None or tb < best_t):
            best_t = tb
            best_index = i
    if t_plane is not None and (best_t is None or t_plane < best_t):
        return PlaneHit(t_plane)
    if best_t is not None:
        return BoxHit(best_t, best_index)
    return Miss()


# Grid raycasting. Formula structure matches the scalar routines above exactly;
# see the module docstring.

HIT_MISS = 0
HIT_PLANE = 1
HIT_BOX = 2


@dataclass
class GridHits:
    """Per-pixel first-hit render: kind in {HIT_MISS, HIT_PLANE, HIT_BOX}."""

    kind: np.ndarray        # (H, W) int8
    t: np.ndarray           # (H, W) float64, inf where kind == HIT_MISS
    box_index: np.ndarray   # (H, W) int32, -1 where no box is hit


def pixel_ray_grid(cam: CameraModel, pose: PoseSE3) -> tuple[np.ndarray, np.ndarray]:
    """Viewing rays for every pixel: (origin (3,), directions (H, W, 3))."""
    us = np.arange(cam.width, dtype=np.float64)
    vs = np.arange(cam.height, dtype=np.float64)
    x = (us - cam.cx) / cam.fx
    y = (vs - cam.cy) / cam.fy
    shape = (cam.height, cam.width)
    xg = np.broadcast_to(x[None, :], shape)
    yg = np.broadcast_to(y[:, None], shape)
    r = pose.rotation
    dx = r[0, 0] * xg + r[0, 1] * yg + r[0, 2]
    dy = r[1, 0] * xg + r[1, 1] * yg + r[1, 2]
    dz = r[2, 0] * xg + r[2, 1] * yg + r[2, 2]
    n = np.sqrt(dx * dx + dy * dy + dz * dz)
    return pose.translation.copy(), np.stack([dx / n, dy / n, dz / n], axis=-1)


def plane_t_grid(origin: np.ndarray, dirs: np.ndarray, plane: RoadPlane) -> np.ndarray:
    """Positive plane-hit t per ray, +inf where the ray misses."""
    n = plane.normal
    dx = dirs[..., 0]
    dy = dirs[..., 1]
    dz = dirs[..., 2]
    denom = n[0] * dx + n[1] * dy + n[2] * dz
    num = plane.offset - (n[0] * origin[0] + n[1] * origin[1] + n[2] * origin[2])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num / denom
    ok = (np.abs(denom) >= PARALLEL_TOL) & (t > 0) & np.isfinite(t)
    return np.where(ok, t, np.inf)


def box_t_grid(origin: np.ndarray, dirs: np.ndarray, box: OrientedBox) -> np.ndarray:
    """Positive box-hit t per ray (exit t from inside), +inf where the ray misses."""
    c = box.center
    rx = origin[0] - c[0]
    ry = origin[1] - c[1]
    rz = origin[2] - c[2]
    dx = dirs[..., 0]
    dy = dirs[..., 1]
    dz = dirs[..., 2]
    tmin = np.full(dirs.shape[:-1], -np.inf)
    tmax = np.full(dirs.shape[:-1], np.inf)
    for j in range(3):
        ax = box.axes[j]
        h = box.half_extents[j]
        p = rx * ax[0] + ry * ax[1] + rz * ax[2]   # scalar: one origin per grid
        q = dx * ax[0] + dy * ax[1] + dz * ax[2]
        par = q == 0.0
        safe = np.where(par, 1.0, q)
        t1 = (-h - p) / safe
        t2 = (h - p) / safe
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        inside = abs(p) <= h
        lo = np.where(par, -np.inf if inside else np.inf, lo)
        hi = np.where(par, np.inf if inside else -np.inf, hi)
        tmin = np.maximum(tmin, lo)
        tmax = np.minimum(tmax, hi)
    t = np.where(tmin > 0.0, tmin, np.where(tmax > 0.0, tmax, np.inf))
    return np.where(tmax < tmin, np.inf, t)


def raycast_grid(cam: CameraModel, pose: PoseSE3, plane: RoadPlane,
                 boxes: list[OrientedBox]) -> GridHits:
    """First-hit render of the plane and boxes for every pixel."""
    origin, dirs = pixel_ray_grid(cam, pose)
    t_plane = plane_t_grid(origin, dirs, plane)
    shape = t_plane.shape
    best_t = np.full(shape, np.inf)
    best_index = np.full(shape, -1, dtype=np.int32)
    for i, box in enumerate(boxes):
        tb = box_t_grid(origin, dirs, box)
        better = tb < best_t   # strict: earlier box keeps exact ties
        best_t = np.where(better, tb, best_t)
        best_index = np.where(better, np.int32(i), best_index)
    plane_first = np.isfinite(t_plane) & (t_plane < best_t)  # tie goes to the box
    box_hit = np.isfinite(best_t) & ~plane_first
    kind = np.zeros(shape, dtype=np.int8)
    kind[plane_first] = HIT_PLANE
    kind[box_hit] = HIT_BOX
    t = np.where(plane_first, t_plane, np.where(box_hit, best_t, np.inf))
    box_index = np.where(box_hit, best_index, np.int32(-1))
    return GridHits(kind=kind, t=t, box_index=box_index)
