"""Frame-by-frame orchestration: plane and box fitting, prior construction,
color-model bootstrap, CRF solve, and back-projection.

Priors are kept in world coordinates, so carrying them from one frame to the
next is an identity transfer; the camera pose alone accounts for ego motion
when they are rendered into the new view.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .colorlines import (DEFAULT_BIN_WIDTH, VARIANCE_FLOOR, build_model,
                         edge_capacities, road_scores)
from .crf import CostField, LabelMask, PairwiseField, SolveResult, solve
from .errors import ModelUnderdetermined, NoPlaneFound
from .freespace import (DEFAULT_STRIDE, DEFAULT_T_MAX, FreeSpaceCloud,
                        backproject_mask)
from .geometry import (CameraModel, OrientedBox, PoseSE3, RoadPlane,
                       plane_from_theta_d)
from .obstacles import (DEFAULT_H_MAX, DEFAULT_H_MIN, estimate_obstacle_count,
                        fit_obstacles, points_above_plane, rest_on_plane)
from .planefit import PlaneSearchConfig, fit_plane_hough, refine_plane_ls
from .priors import (CrfWeights, ProbMap, UnaryField, accumulate_unaries,
                     indicator_map, transfer_priors, unary_from_indicator,
                     unary_from_probmap, zero_unary)
from .synth import ConfusionCounts, compare_masks, metrics

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    weights: CrfWeights = field(default_factory=CrfWeights)
    plane: PlaneSearchConfig = field(default_factory=PlaneSearchConfig)
    refine_plane: bool = True
    refit_interval: int = 1
    kmeans_k: int | None = None
    kmeans_seed: int = 0
    h_min: float = DEFAULT_H_MIN
    h_max: float = DEFAULT_H_MAX
    bin_width: float = DEFAULT_BIN_WIDTH
    variance_floor: float = VARIANCE_FLOOR
    stride: int = DEFAULT_STRIDE
    t_max: float = DEFAULT_T_MAX
    bootstrap_threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.bootstrap_threshold < 1.0:
            raise ValueError("bootstrap_threshold must lie in (0, 1)")
        if self.refit_interval < 1:
            raise ValueError("refit_interval must be at least 1")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")


@dataclass(frozen=True)
class FrameInput:
    """One keyframe's worth of pipeline input; cloud is in this camera's
    frame, the pose maps it to world."""

    image: np.ndarray
    prob_map: ProbMap
    cloud: np.ndarray
    pose: PoseSE3
    gt_mask: LabelMask | None = None


@dataclass(frozen=True)
class SegmentResult:
    """CRF solution for one frame plus the fields that produced it."""

    solve: SolveResult
    d1: UnaryField
    d2: UnaryField
    d3: UnaryField
    pairwise: PairwiseField
    color_model_ok: bool


@dataclass(frozen=True)
class FrameResult:
    frame_id: int
    mask: LabelMask
    freespace: FreeSpaceCloud
    plane: RoadPlane
    boxes: list[OrientedBox]
    energy: float
    flow: float
    counts: ConfusionCounts | None = None
    metrics: dict | None = None


def fit_frame_plane(cloud: np.ndarray, pose: PoseSE3,
                    cfg: PipelineConfig) -> RoadPlane:
    """Hough-fit (optionally polished) plane from a camera-frame cloud,
    anchored at the given pose."""
    result = fit_plane_hough(cloud, cfg.plane)
    if cfg.refine_plane:
        result = refine_plane_ls(cloud, result, cfg.plane)
    return plane_from_theta_d(result.theta, result.dist, pose)


def fit_frame_boxes(world_cloud: np.ndarray, plane: RoadPlane,
                    cfg: PipelineConfig) -> list[OrientedBox]:
    """Fit the frame's obstacle boxes and rest them on the road plane.

    With no K configured, the cluster count comes from the number of
    spatially separated groups in the height band rather than from the point
    count: splitting one obstacle across clusters frays the rendered
    occlusion edge, and the priors repeat every fraying as segmentation
    error. Grounding the boxes closes the h_min gap under each obstacle for
    the same reason.
    """
    K = cfg.kmeans_k
    if K is None:
        band = points_above_plane(world_cloud, plane, cfg.h_min, cfg.h_max)
        if len(band) == 0:
            return []
        K = min(max(estimate_obstacle_count(world_cloud[band]), 1), 32)
    boxes = fit_obstacles(world_cloud, plane, K=K, seed=cfg.kmeans_seed,
                          h_min=cfg.h_min, h_max=cfg.h_max)
    return [rest_on_plane(box, plane) for box in boxes]


def segment_frame(cam: CameraModel, pose: PoseSE3, plane: RoadPlane,
                  boxes: list[OrientedBox],
                  prev_plane: RoadPlane | None,
                  prev_boxes: list[OrientedBox] | None,
                  prob_map: ProbMap, image: np.ndarray,
                  cfg: PipelineConfig) -> SegmentResult:
    """Assemble the three unary fields and the pairwise capacities for one
    frame and solve the CRF exactly.

    An underdetermined color model degrades to zero pairwise capacities
    instead of failing: the unary fields then decide alone.
    """
    d1 = unary_from_indicator(indicator_map(cam, pose, plane, boxes),
                              cfg.weights.w1, cfg.weights.w2)
    if prev_plane is None:
        d2 = zero_unary(cam.width, cam.height)
    else:
        tplane, tboxes = transfer_priors(prev_plane, prev_boxes or [],
                                         PoseSE3.identity())
        d2 = unary_from_indicator(indicator_map(cam, pose, tplane, tboxes),
                                  cfg.weights.w1, cfg.weights.w2)
    d3 = unary_from_probmap(prob_map, cfg.weights.w3)
    unary = accumulate_unaries([d1, d2, d3])

    bootstrap = prob_map.s_road >= cfg.bootstrap_threshold
    color_model_ok = True
    try:
        model = build_model(image, bootstrap, cfg.bin_width,
                            cfg.variance_floor)
        pairwise = edge_capacities(road_scores(image, model))
    except ModelUnderdetermined as exc:
        log.warning("color model underdetermined (%s); "
                    "smoothness term disabled for this frame", exc)
        color_model_ok = False
        pairwise = PairwiseField.zeros(cam.width, cam.height)

    result = solve(CostField(unary=unary, pairwise=pairwise))
    return SegmentResult(solve=result, d1=d1, d2=d2, d3=d3,
                         pairwise=pairwise, color_model_ok=color_model_ok)


def run_pipeline(cam: CameraModel, frames: list[FrameInput],
                 cfg: PipelineConfig | None = None) -> list[FrameResult]:
    """Process temporally ordered frames; each frame's fitted priors feed the
    next frame's transferred unary term.

    A failed plane fit aborts on the first frame (nothing to fall back on)
    and falls back to the previous frame's plane afterwards.
    """
    cfg = cfg or PipelineConfig()
    results: list[FrameResult] = []
    plane: RoadPlane | None = None
    prev_plane: RoadPlane | None = None
    prev_boxes: list[OrientedBox] | None = None

    for index, frame in enumerate(frames):
        if (frame.image.shape[:2] != (cam.height, cam.width)
                or frame.prob_map.s_road.shape != (cam.height, cam.width)):
            raise ValueError(f"frame {index}: dimensions do not match camera")
        if plane is None or index % cfg.refit_interval == 0:
            try:
                plane = fit_frame_plane(frame.cloud, frame.pose, cfg)
            except NoPlaneFound:
                if plane is None:
                    raise
                log.warning("frame=%d plane fit failed; reusing previous "
                            "plane", index)
        world_cloud = frame.pose.transform(frame.cloud)
        boxes = fit_frame_boxes(world_cloud, plane, cfg)
        seg = segment_frame(cam, frame.pose, plane, boxes, prev_plane,
                            prev_boxes, frame.prob_map, frame.image, cfg)
        log.info("frame=%d energy=%.6f flow=%.6f", index, seg.solve.energy,
                 seg.solve.flow)
        cloud = backproject_mask(seg.solve.mask, cam, frame.pose, plane,
                                 stride=cfg.stride, t_max=cfg.t_max,
                                 frame_id=index)
        counts = frame_metrics = None
        if frame.gt_mask is not None:
            counts = compare_masks(seg.solve.mask, frame.gt_mask)
            frame_metrics = metrics(counts)
        results.append(FrameResult(
            frame_id=index, mask=seg.solve.mask, freespace=cloud,
            plane=plane, boxes=boxes, energy=seg.solve.energy,
            flow=seg.solve.flow, counts=counts, metrics=frame_metrics))
        prev_plane, prev_boxes = plane, boxes
    return results


def ingest_softmax(class_maps, road_class_index: int) -> ProbMap:
    """Collapse per-class score rasters to the (road, strongest other class)
    pair the unary term consumes."""
    maps = np.asarray(class_maps)
    if maps.ndim != 3 or maps.shape[0] < 2:
        raise ValueError("expected a CxHxW stack with at least two classes")
    if not 0 <= road_class_index < maps.shape[0]:
        raise ValueError(f"road_class_index {road_class_index} out of range "
                         f"for {maps.shape[0]} classes")
    if maps.min() < 0 or maps.max() > 1:
        raise ValueError("class scores must lie in [0, 1]")
    others = np.delete(maps, road_class_index, axis=0)
    return ProbMap(s_road=maps[road_class_index].copy(),
                   s_nonroad_max=others.max(axis=0))
