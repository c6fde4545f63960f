"""Synthetic road scenes with exact ground truth, plus mask-comparison
metrics.

A scene is a pitched ground plane, a few boxes resting on it, and a camera
driving forward. Each frame yields a surface-sampled point cloud, a rendered
color image, a per-pixel class-score map, and the true road mask, all
reproducible from the scene seed alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .crf import LabelMask
from .geometry import (HIT_BOX, HIT_PLANE, CameraModel, OrientedBox, PoseSE3,
                       RoadPlane, plane_from_theta_d, raycast_grid)
from .priors import ProbMap

ROAD_GRAY = (105, 105, 105)
SKY_COLOR = (135, 160, 190)
BOX_PALETTE = ((180, 60, 50), (60, 90, 180), (200, 160, 60), (90, 160, 90))
IMAGE_NOISE_SIGMA = 6.0

# Ground patch sampled per frame, in meters relative to the camera.
GROUND_X_SPAN = (-10.0, 10.0)
GROUND_Z_SPAN = (2.0, 40.0)
OUTLIER_X_SPAN = (-12.0, 12.0)
OUTLIER_Y_SPAN = (-3.0, 3.0)
OUTLIER_Z_SPAN = (0.0, 45.0)

# True class scores before label flips: road pixels score 0.9 road / 0.1
# non-road, flipped pixels swap the pair.
SCORE_HI = np.float32(0.9)
SCORE_LO = np.float32(0.1)


@dataclass(frozen=True)
class SceneSpec:
    """Everything needed to regenerate a scene bit for bit."""

    theta: float
    dist: float
    boxes: tuple
    camera: CameraModel
    trajectory: tuple
    cloud_density: float = 30.0
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    label_flip_rate: float = 0.0
    rng_seed: int = 7

    def __post_init__(self):
        if not self.trajectory:
            raise ValueError("trajectory must contain at least one pose")
        if self.cloud_density <= 0:
            raise ValueError("cloud_density must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError("outlier_fraction must lie in [0, 1)")
        if not 0.0 <= self.label_flip_rate <= 1.0:
            raise ValueError("label_flip_rate must lie in [0, 1]")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")
        object.__setattr__(self, "boxes", tuple(self.boxes))
        object.__setattr__(self, "trajectory", tuple(self.trajectory))

    def plane(self) -> RoadPlane:
        """The true road plane, anchored at the first trajectory pose."""
        return plane_from_theta_d(self.theta, self.dist, self.trajectory[0])


@dataclass(frozen=True)
class FrameBundle:
    """One generated frame: inputs for the pipeline plus its ground truth."""

    frame_id: int
    pose: PoseSE3
    cloud: np.ndarray        # (N, 3) float64, camera frame
    n_structure: int         # leading cloud rows sampled on true surfaces
    image: np.ndarray        # (H, W, 3) uint8
    prob_map: ProbMap
    gt_mask: LabelMask


def box_on_plane(theta: float, d: float, x: float, z: float,
                 length: float = 4.2, width: float = 1.7,
                 height: float = 1.5) -> OrientedBox:
    """A box resting on the plane, long axis along the driving direction.

    (x, z) locate the footprint center in the first camera's frame.
    """
    st, ct = math.sin(theta), math.cos(theta)
    normal = np.array([0.0, ct, -st])
    forward = np.array([0.0, st, ct])
    lateral = np.array([1.0, 0.0, 0.0])
    ground = np.array([x, z * st / ct - d, z])
    half = np.array([length / 2.0, width / 2.0, height / 2.0])
    return OrientedBox(center=ground + half[2] * normal,
                       axes=np.stack([forward, lateral, normal]),
                       half_extents=half)


def default_scene_spec(**overrides) -> SceneSpec:
    """A five-frame straight drive past two parked cars."""
    theta, dist = 0.03, 1.6
    fields = dict(
        theta=theta,
        dist=dist,
        boxes=(box_on_plane(theta, dist, -2.0, 8.0),
               box_on_plane(theta, dist, 2.5, 15.0)),
        camera=CameraModel(fx=525.0, fy=525.0, cx=320.0, cy=240.0,
                           width=640, height=480),
        trajectory=tuple(PoseSE3(np.eye(3), np.array([0.0, 0.0, float(k)]))
                         for k in range(5)),
    )
    fields.update(overrides)
    return SceneSpec(**fields)


def _sample_plane_points(rng, plane: RoadPlane, pose: PoseSE3,
                         density: float) -> np.ndarray:
    """Uniform points on the plane over a fixed patch ahead of the camera,
    in world coordinates."""
    n = plane.normal
    if n[1] <= 1e-6:
        raise ValueError("plane normal must point upward to sample the ground")
    x0, x1 = GROUND_X_SPAN
    z0, z1 = GROUND_Z_SPAN
    count = int(round(density * (x1 - x0) * (z1 - z0)))
    zc = pose.translation[2]
    xs = rng.uniform(x0, x1, count)
    zs = rng.uniform(zc + z0, zc + z1, count)
    ys = (plane.offset - n[0] * xs - n[2] * zs) / n[1]
    return np.stack([xs, ys, zs], axis=-1)


def _sample_box_points(rng, box: OrientedBox, density: float) -> np.ndarray:
    """Uniform points on all six faces, counts proportional to face area."""
    h = box.half_extents
    pts = []
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        count = int(round(density * 4.0 * h[i] * h[j]))
        for sign in (1.0, -1.0):
            ci = rng.uniform(-h[i], h[i], count)
            cj = rng.uniform(-h[j], h[j], count)
            pts.append(box.center
                       + sign * h[k] * box.axes[k]
                       + ci[:, None] * box.axes[i]
                       + cj[:, None] * box.axes[j])
    return np.concatenate(pts, axis=0)


def _render_image(rng, hits) -> np.ndarray:
    base = np.empty(hits.kind.shape + (3,), dtype=np.float64)
    base[:] = SKY_COLOR
    base[hits.kind == HIT_PLANE] = ROAD_GRAY
    on_box = hits.kind == HIT_BOX
    palette = np.asarray(BOX_PALETTE, dtype=np.float64)
    base[on_box] = palette[hits.box_index[on_box] % len(palette)]
    noisy = base + rng.normal(0.0, IMAGE_NOISE_SIGMA, base.shape)
    return np.clip(noisy, 0.0, 255.0).astype(np.uint8)


def gen_frame(spec: SceneSpec, frame_index: int) -> FrameBundle:
    """Generate one frame; the stream is seeded by rng_seed XOR frame_index
    so frames are independent and the set is order-insensitive.

    Fixed draw order: ground points, box faces, surface noise, outliers,
    image noise, label flips.
    """
    if not 0 <= frame_index < len(spec.trajectory):
        raise ValueError(f"frame_index {frame_index} outside trajectory")
    pose = spec.trajectory[frame_index]
    plane = spec.plane()
    rng = np.random.default_rng(spec.rng_seed ^ frame_index)

    world = [_sample_plane_points(rng, plane, pose, spec.cloud_density)]
    world.extend(_sample_box_points(rng, b, spec.cloud_density)
                 for b in spec.boxes)
    structure = pose.inverse().transform(np.concatenate(world, axis=0))
    structure = structure + rng.normal(0.0, spec.noise_sigma, structure.shape)
    n_structure = structure.shape[0]

    f = spec.outlier_fraction
    n_out = int(round(f / (1.0 - f) * n_structure))
    outliers = np.stack([rng.uniform(*OUTLIER_X_SPAN, n_out),
                         rng.uniform(*OUTLIER_Y_SPAN, n_out),
                         rng.uniform(*OUTLIER_Z_SPAN, n_out)], axis=-1)
    cloud = np.concatenate([structure, outliers], axis=0)

    hits = raycast_grid(spec.camera, pose, plane, list(spec.boxes))
    image = _render_image(rng, hits)
    gt = hits.kind == HIT_PLANE

    flips = rng.random(gt.shape) < spec.label_flip_rate
    labels = gt ^ flips
    prob_map = ProbMap(s_road=np.where(labels, SCORE_HI, SCORE_LO),
                       s_nonroad_max=np.where(labels, SCORE_LO, SCORE_HI))
    return FrameBundle(frame_id=frame_index, pose=pose, cloud=cloud,
                       n_structure=n_structure, image=image,
                       prob_map=prob_map, gt_mask=LabelMask(road=gt))


def gen_scene(spec: SceneSpec) -> list[FrameBundle]:
    return [gen_frame(spec, i) for i in range(len(spec.trajectory))]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


def compare_masks(pred: LabelMask, gt: LabelMask) -> ConfusionCounts:
    """Pixel confusion counts; road is the positive class."""
    if pred.road.shape != gt.road.shape:
        raise ValueError("mask shapes disagree")
    p, g = pred.road, gt.road
    return ConfusionCounts(tp=int(np.sum(p & g)), fp=int(np.sum(p & ~g)),
                           fn=int(np.sum(~p & g)), tn=int(np.sum(~p & ~g)))


def metrics(counts: ConfusionCounts) -> dict:
    """Precision, recall, and F-value; None where a ratio has no denominator
    or both precision and recall are zero."""
    precision = recall = fval = None
    if counts.tp + counts.fp > 0:
        precision = counts.tp / (counts.tp + counts.fp)
    if counts.tp + counts.fn > 0:
        recall = counts.tp / (counts.tp + counts.fn)
    if precision is not None and recall is not None and precision + recall > 0:
        fval = 2.0 * precision * recall / (precision + recall)
    return {"precision": precision, "recall": recall, "fval": fval}


def scene_spec_to_dict(spec: SceneSpec) -> dict:
    return {
        "plane": {"theta": spec.theta, "dist": spec.dist},
        "boxes": [{"center": [float(x) for x in b.center],
                   "axes": [[float(x) for x in row] for row in b.axes],
                   "half_extents": [float(x) for x in b.half_extents]}
                  for b in spec.boxes],
        "camera": {"fx": spec.camera.fx, "fy": spec.camera.fy,
                   "cx": spec.camera.cx, "cy": spec.camera.cy,
                   "width": spec.camera.width, "height": spec.camera.height},
        "trajectory": [{"rotation": [float(x) for x in p.rotation.ravel()],
                        "translation": [float(x) for x in p.translation]}
                       for p in spec.trajectory],
        "cloud_density": spec.cloud_density,
        "noise_sigma": spec.noise_sigma,
        "outlier_fraction": spec.outlier_fraction,
        "label_flip_rate": spec.label_flip_rate,
        "rng_seed": spec.rng_seed,
    }


def scene_spec_from_dict(obj: dict) -> SceneSpec:
    try:
        cam = obj["camera"]
        boxes = tuple(OrientedBox(
            center=np.asarray(b["center"], dtype=np.float64),
            axes=np.asarray(b["axes"], dtype=np.float64),
            half_extents=np.asarray(b["half_extents"], dtype=np.float64))
            for b in obj["boxes"])
        trajectory = tuple(PoseSE3(
            np.asarray(p["rotation"], dtype=np.float64).reshape(3, 3),
            np.asarray(p["translation"], dtype=np.float64))
            for p in obj["trajectory"])
        return SceneSpec(
            theta=float(obj["plane"]["theta"]),
            dist=float(obj["plane"]["dist"]),
            boxes=boxes,
            camera=CameraModel(fx=float(cam["fx"]), fy=float(cam["fy"]),
                               cx=float(cam["cx"]), cy=float(cam["cy"]),
                               width=int(cam["width"]),
                               height=int(cam["height"])),
            trajectory=trajectory,
            cloud_density=float(obj.get("cloud_density", 30.0)),
            noise_sigma=float(obj.get("noise_sigma", 0.0)),
            outlier_fraction=float(obj.get("outlier_fraction", 0.0)),
            label_flip_rate=float(obj.get("label_flip_rate", 0.0)),
            rng_seed=int(obj.get("rng_seed", 7)))
    except KeyError as exc:
        raise ValueError(f"scene spec missing field {exc}") from None
