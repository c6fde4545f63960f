"""Obstacle extraction: height-filter the cloud against the fitted road plane,
over-cluster with K-means, and wrap each cluster in a plane-aligned box.

Boxes keep the road-plane normal as their third axis; the other two axes come
from the principal directions of the cluster footprint in the plane, so a car
seen obliquely still gets a tight box. Over-clustering (K too large) splits an
object across boxes, which stays conservative: the union still covers it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import OrientedBox, RoadPlane

DEFAULT_H_MIN = 0.15
DEFAULT_H_MAX = 3.5
MIN_HALF_EXTENT = 1e-3
DEFAULT_MERGE_RADIUS = 0.75


@dataclass(frozen=True)
class ClusterSet:
    """Disjoint point-index clusters with their centroids; no cluster empty."""

    clusters: list = field(default_factory=list)
    centroids: list = field(default_factory=list)
    K: int = 0

    def __post_init__(self):
        if not (len(self.clusters) == len(self.centroids) == self.K):
            raise ValueError("clusters, centroids and K must agree")
        if any(len(c) == 0 for c in self.clusters):
            raise ValueError("empty clusters are not allowed")
        if self.clusters:
            allidx = np.concatenate([np.asarray(c) for c in self.clusters])
            if len(np.unique(allidx)) != len(allidx):
                raise ValueError("clusters must be disjoint")


def points_above_plane(points, plane: RoadPlane, h_min: float = DEFAULT_H_MIN,
                       h_max: float = DEFAULT_H_MAX) -> np.ndarray:
    """Indices of points with height in (h_min, h_max] above the plane."""
    if not (h_min >= 0 and h_max > h_min):
        raise ValueError("need 0 <= h_min < h_max")
    pts = np.asarray(points, dtype=np.float64)
    h = plane.signed_height(pts)
    return np.nonzero((h > h_min) & (h <= h_max))[0]


def default_k(n_points: int) -> int:
    """Cluster count heuristic: one cluster per ~150 points, within [4, 32]."""
    return min(max(4, math.ceil(n_points / 150)), 32)


def estimate_obstacle_count(points, radius: float = DEFAULT_MERGE_RADIUS) -> int:
    """Count spatially separated point groups by voxel connectivity.

    Points are hashed into cubic voxels of the given edge length and occupied
    voxels touching in the 26-neighborhood are merged, so groups closer than
    ~2*radius can fuse. Coarse on purpose: the result seeds the cluster count,
    not the clusters themselves.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an Nx3 array, got shape {pts.shape}")
    if pts.shape[0] == 0:
        return 0
    cells = np.unique(np.floor(pts / radius).astype(np.int64), axis=0)
    index = {tuple(c): i for i, c in enumerate(cells)}
    parent = list(range(len(cells)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    offsets = [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
               for dz in (-1, 0, 1) if (dx, dy, dz) != (0, 0, 0)]
    for c in cells:
        i = index[tuple(c)]
        for off in offsets:
            j = index.get((c[0] + off[0], c[1] + off[1], c[2] + off[2]))
            if j is not None:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    return len({find(i) for i in range(len(cells))})


def _kmeans_full(points: np.ndarray, K: int, seed: int, max_iters: int):
    """Seeded k-means++ then Lloyd; returns (assignments, centroids, objectives).

    objectives[i] is the summed squared distance right after the i-th
    assignment step, so the sequence is non-increasing. Clusters that go empty
    keep their previous centroid and simply attract no points.
    """
    n = points.shape[0]
    rng = np.random.default_rng(seed)
    K = min(K, n)

    centroids = np.empty((K, 3))
    centroids[0] = points[rng.integers(n)]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total > 0:
            centroids[k] = points[rng.choice(n, p=d2 / total)]
        else:
            centroids[k] = points[rng.integers(n)]
        d2 = np.minimum(d2, np.sum((points - centroids[k]) ** 2, axis=1))

    assign = np.full(n, -1)
    objectives = []
    for _ in range(max_iters):
        dist2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_assign = np.argmin(dist2, axis=1)
        objectives.append(float(dist2[np.arange(n), new_assign].sum()))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for k in range(K):
            members = points[assign == k]
            if len(members):
                centroids[k] = members.mean(axis=0)
    return assign, centroids, objectives


def kmeans(points, K: int, seed: int = 0, max_iters: int = 100) -> ClusterSet:
    """Cluster points into at most K groups; empty groups are dropped."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise ValueError(f"expected a non-empty Nx3 array, got shape {pts.shape}")
    if K < 1:
        raise ValueError("K must be at least 1")
    assign, centroids, _ = _kmeans_full(pts, K, seed, max_iters)
    clusters = []
    kept_centroids = []
    for k in range(centroids.shape[0]):
        idx = np.nonzero(assign == k)[0]
        if len(idx):
            clusters.append(idx)
            kept_centroids.append(centroids[k].copy())
    return ClusterSet(clusters=clusters, centroids=kept_centroids, K=len(clusters))


def _tangent_basis(normal: np.ndarray):
    """Right-handed in-plane basis (e1, e2) for a unit plane normal."""
    a = np.array([1.0, 0.0, 0.0])
    if abs(normal @ a) > 0.9:
        a = np.array([0.0, 1.0, 0.0])
    e1 = a - (a @ normal) * normal
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    return e1, e2


def fit_box(cluster_points, plane: RoadPlane) -> OrientedBox:
    """Fit a plane-aligned enclosing box to one cluster.

    The box's third axis is the plane normal; the first two are the principal
    directions of the points' footprint in the plane (closed-form 2x2 PCA).
    Extents take the exact min/max span, floored at 1 mm, so every input point
    is inside the returned box.
    """
    pts = np.asarray(cluster_points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise ValueError(f"expected a non-empty Nx3 array, got shape {pts.shape}")
    n = plane.normal
    e1, e2 = _tangent_basis(n)

    rel = pts - pts.mean(axis=0)
    u = rel @ e1
    v = rel @ e2
    a = float(u @ u)
    b = float(u @ v)
    c = float(v @ v)
    # major-axis angle of the 2x2 covariance [[a, b], [b, c]]
    phi = 0.5 * math.atan2(2.0 * b, a - c)
    u1 = math.cos(phi) * e1 + math.sin(phi) * e2
    u1 = u1 / np.linalg.norm(u1)
    u2 = np.cross(n, u1)
    axes = np.vstack([u1, u2, n])

    coords = (pts - pts[0]) @ axes.T
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    center = pts[0] + axes.T @ ((lo + hi) / 2.0)
    half = np.maximum((hi - lo) / 2.0, MIN_HALF_EXTENT)
    return OrientedBox(center=center, axes=axes, half_extents=half)


def rest_on_plane(box: OrientedBox, plane: RoadPlane) -> OrientedBox:
    """Extend a box down so its underside reaches the plane.

    The height band that feeds the fit starts above the plane, so a fitted box
    hovers by h_min even though the obstacle stands on the road. Stretching
    the bottom to height zero restores the full occlusion footprint. The box
    only ever grows; one already reaching below the plane is returned as-is.
    Requires a box whose third axis is the plane normal, as fit_box produces.
    """
    n = plane.normal
    center_h = float(box.center @ n - plane.offset)
    bottom = center_h - float(box.half_extents[2])
    top = center_h + float(box.half_extents[2])
    if bottom <= 0.0:
        return box
    half = box.half_extents.copy()
    half[2] = max(top / 2.0, MIN_HALF_EXTENT)
    center = box.center + (top / 2.0 - center_h) * n
    return OrientedBox(center=center, axes=box.axes, half_extents=half)


def fit_obstacles(points, plane: RoadPlane, K: int | None = None, seed: int = 0,
                  h_min: float = DEFAULT_H_MIN,
                  h_max: float = DEFAULT_H_MAX) -> list[OrientedBox]:
    """Height-filter, cluster, and box the obstacle points above the plane."""
    pts = np.asarray(points, dtype=np.float64)
    idx = points_above_plane(pts, plane, h_min, h_max)
    if len(idx) == 0:
        return []
    sub = pts[idx]
    if K is None:
        K = default_k(len(sub))
    clusters = kmeans(sub, K, seed=seed)
    return [fit_box(sub[c], plane) for c in clusters.clusters]
