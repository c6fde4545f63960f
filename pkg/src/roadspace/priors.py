"""Per-pixel label costs from 3D priors and segmentation probabilities.

Ray casting against the fitted plane and obstacle boxes yields a binary
indicator per pixel (1 = the pixel's ray reaches the road surface first).
Indicator maps from the current and the transferred previous frame, plus a
two-channel probability map, each become a two-label cost field; the fields
add per pixel to form the full data term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    HIT_PLANE,
    CameraModel,
    OrientedBox,
    PoseSE3,
    RoadPlane,
    raycast_grid,
)


@dataclass(frozen=True)
class IndicatorMap:
    """Binary road-visibility map: values[v, u] = 1 iff the ray through pixel
    (u, v) hits the road plane before any obstacle box."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 2:
            raise ValueError(f"expected an HxW map, got shape {v.shape}")
        if not np.all((v == 0) | (v == 1)):
            raise ValueError("indicator values must be 0 or 1")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ProbMap:
    """Per-pixel road probability and the max over non-road class probabilities."""

    s_road: np.ndarray
    s_nonroad_max: np.ndarray

    def __post_init__(self):
        a, b = self.s_road, self.s_nonroad_max
        if a.ndim != 2 or a.shape != b.shape:
            raise ValueError("channels must be equal-shape HxW arrays")
        if not (np.all(a >= 0) and np.all(a <= 1) and np.all(b >= 0) and np.all(b <= 1)):
            raise ValueError("probabilities must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.s_road.shape[0]

    @property
    def width(self) -> int:
        return self.s_road.shape[1]


@dataclass(frozen=True)
class CrfWeights:
    w1: float = 0.9
    w2: float = 0.9
    w3: float = 1.0

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or self.w3 < 0:
            raise ValueError("weights must be non-negative")


@dataclass(frozen=True)
class UnaryField:
    """Per-pixel costs for the two labels; finite and non-negative."""

    cost_road: np.ndarray
    cost_nonroad: np.ndarray

    def __post_init__(self):
        a, b = self.cost_road, self.cost_nonroad
        if a.ndim != 2 or a.shape != b.shape:
            raise ValueError("cost planes must be equal-shape HxW arrays")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("costs must be finite")
        if (a < 0).any() or (b < 0).any():
            raise ValueError("costs must be non-negative")

    @property
    def height(self) -> int:
        return self.cost_road.shape[0]

    @property
    def width(self) -> int:
        return self.cost_road.shape[1]


def indicator_map(cam: CameraModel, pose: PoseSE3, plane: RoadPlane,
                  boxes: list[OrientedBox]) -> IndicatorMap:
    """Ray-cast every pixel; 1 where the road plane is the first hit."""
    hits = raycast_grid(cam, pose, plane, boxes)
    return IndicatorMap(values=(hits.kind == HIT_PLANE).astype(np.uint8))


def transfer_priors(plane: RoadPlane, boxes: list[OrientedBox],
                    relative_pose: PoseSE3):
    """Rigidly move the previous frame's plane and boxes into the current frame.

    relative_pose maps previous-frame world coordinates to current-frame world
    coordinates; with a shared world frame it is the identity and the priors
    pass through unchanged.
    """
    rel = relative_pose
    if np.array_equal(rel.rotation, np.eye(3)) and not rel.translation.any():
        return plane, boxes
    new_pose = rel.compose(plane.keyframe_pose)
    new_plane = RoadPlane(
        theta=plane.theta,
        dist=plane.dist,
        keyframe_pose=new_pose,
        normal=rel.rotate(plane.normal),
        offset=plane.offset + rel.rotate(plane.normal) @ rel.translation,
    )
    new_boxes = [OrientedBox(center=rel.transform(b.center),
                             axes=b.axes @ rel.rotation.T,
                             half_extents=b.half_extents.copy())
                 for b in boxes]
    return new_plane, new_boxes


def unary_from_indicator(ind: IndicatorMap, w_road_miss: float,
                         w_plane_hit: float) -> UnaryField:
    """Indicator to costs: labeling road where the ray missed costs
    w_road_miss; labeling non-road where the ray hit road costs w_plane_hit."""
    if w_road_miss < 0 or w_plane_hit < 0:
        raise ValueError("weights must be non-negative")
    i = ind.values.astype(np.float64)
    return UnaryField(cost_road=w_road_miss * (1.0 - i),
                      cost_nonroad=w_plane_hit * i)


def unary_from_probmap(probs: ProbMap, w3: float) -> UnaryField:
    """Probabilities to costs: labeling road is penalized by the strongest
    non-road class, labeling non-road by the road probability."""
    if w3 < 0:
        raise ValueError("w3 must be non-negative")
    # inputs may be float32 from disk; promote before scaling
    return UnaryField(cost_road=w3 * probs.s_nonroad_max.astype(np.float64),
                      cost_nonroad=w3 * probs.s_road.astype(np.float64))


def accumulate_unaries(fields: list[UnaryField]) -> UnaryField:
    """Per-pixel, per-label sum of cost fields."""
    if not fields:
        raise ValueError("need at least one field")
    shape = fields[0].cost_road.shape
    for f in fields[1:]:
        if f.cost_road.shape != shape:
            raise ValueError(
                f"dimension mismatch: {f.cost_road.shape} vs {shape}")
    road = fields[0].cost_road.copy()
    nonroad = fields[0].cost_nonroad.copy()
    for f in fields[1:]:
        road += f.cost_road
        nonroad += f.cost_nonroad
    return UnaryField(cost_road=road, cost_nonroad=nonroad)


def zero_unary(width: int, height: int) -> UnaryField:
    return UnaryField(cost_road=np.zeros((height, width)),
                      cost_nonroad=np.zeros((height, width)))
