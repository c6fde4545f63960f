"""Road free-space estimation: 3D plane/obstacle priors fused with per-pixel
road probabilities and an illumination-invariant color model in a binary CRF,
solved exactly by graph cuts."""

from .colorlines import (
    ColorLinesModel,
    RoadScoreMap,
    build_model,
    edge_capacities,
    road_scores,
)
from .crf import (
    CostField,
    LabelMask,
    PairwiseField,
    SolveResult,
    brute_force_solve,
    energy,
    solve,
)
from .errors import (
    InvariantError,
    ModelUnderdetermined,
    NoPlaneFound,
    RoadspaceError,
)
from .freespace import FreeSpaceCloud, backproject_mask, export_overlay
from .geometry import (
    BoxHit,
    CameraModel,
    Miss,
    OrientedBox,
    PlaneHit,
    PoseSE3,
    Ray,
    RoadPlane,
    first_hit,
    pixel_ray,
    plane_from_theta_d,
    project_point,
    ray_box_intersect,
    ray_plane_intersect,
)
from .obstacles import (
    ClusterSet,
    estimate_obstacle_count,
    fit_box,
    fit_obstacles,
    kmeans,
    points_above_plane,
    rest_on_plane,
)
from .pipeline import (
    FrameInput,
    FrameResult,
    PipelineConfig,
    fit_frame_boxes,
    ingest_softmax,
    run_pipeline,
    segment_frame,
)
from .planefit import (
    PlaneFitResult,
    PlaneSearchConfig,
    fit_plane_hough,
    refine_plane_ls,
)
from .priors import (
    CrfWeights,
    IndicatorMap,
    ProbMap,
    UnaryField,
    accumulate_unaries,
    indicator_map,
    transfer_priors,
    unary_from_indicator,
    unary_from_probmap,
)
from .synth import (
    ConfusionCounts,
    FrameBundle,
    SceneSpec,
    compare_masks,
    default_scene_spec,
    gen_frame,
    gen_scene,
    metrics,
)

__all__ = [
    "BoxHit",
    "CameraModel",
    "ClusterSet",
    "ColorLinesModel",
    "ConfusionCounts",
    "CostField",
    "CrfWeights",
    "FrameBundle",
    "FrameInput",
    "FrameResult",
    "FreeSpaceCloud",
    "IndicatorMap",
    "InvariantError",
    "LabelMask",
    "Miss",
    "ModelUnderdetermined",
    "NoPlaneFound",
    "OrientedBox",
    "PairwiseField",
    "PipelineConfig",
    "PlaneFitResult",
    "PlaneHit",
    "PlaneSearchConfig",
    "PoseSE3",
    "ProbMap",
    "Ray",
    "RoadPlane",
    "RoadScoreMap",
    "RoadspaceError",
    "SceneSpec",
    "SolveResult",
    "UnaryField",
    "accumulate_unaries",
    "backproject_mask",
    "brute_force_solve",
    "build_model",
    "compare_masks",
    "default_scene_spec",
    "edge_capacities",
    "energy",
    "export_overlay",
    "first_hit",
    "fit_box",
    "estimate_obstacle_count",
    "fit_frame_boxes",
    "fit_obstacles",
    "fit_plane_hough",
    "gen_frame",
    "gen_scene",
    "indicator_map",
    "ingest_softmax",
    "kmeans",
    "metrics",
    "pixel_ray",
    "plane_from_theta_d",
    "points_above_plane",
    "rest_on_plane",
    "project_point",
    "ray_box_intersect",
    "ray_plane_intersect",
    "refine_plane_ls",
    "road_scores",
    "run_pipeline",
    "segment_frame",
    "solve",
    "transfer_priors",
    "unary_from_indicator",
    "unary_from_probmap",
]

__version__ = "0.1.0"
