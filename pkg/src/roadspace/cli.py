"""Command-line interface: scene synthesis, per-stage fitting and
segmentation, back-projection, evaluation, and the end-to-end pipeline.

Every stage reads and writes the declared file formats, so a pipeline run can
be reproduced stage by stage with identical bytes. Exit codes: 0 success,
2 bad input, 3 no plane found, 4 internal invariant violation.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import fileio
from .crf import LabelMask
from .errors import NoPlaneFound
from .freespace import backproject_mask, export_overlay
from .geometry import plane_from_theta_d
from .pipeline import (FrameInput, PipelineConfig, fit_frame_boxes,
                       run_pipeline, segment_frame)
from .planefit import PlaneSearchConfig, fit_plane_hough, refine_plane_ls
from .priors import CrfWeights, ProbMap
from .report import write_metrics
from .synth import (compare_masks, default_scene_spec, gen_scene, metrics,
                    scene_spec_from_dict, scene_spec_to_dict)

EXIT_INPUT_ERROR = 2
EXIT_NO_PLANE = 3
EXIT_INTERNAL = 4

_CONFIG_SECTIONS = {
    "weights": {"w1", "w2", "w3"},
    "plane": {"theta_min", "theta_max", "theta_step", "d_init", "d_window",
              "d_step", "inlier_tol", "min_inliers"},
    "kmeans": {"k", "seed"},
    "heights": {"h_min", "h_max"},
    "color": {"bin_width", "variance_floor"},
    "backproject": {"stride", "t_max"},
}
_CONFIG_SCALARS = {"bootstrap_threshold", "refit_interval", "refine_plane"}
_CONFIG_IO_KEYS = {"camera", "frames"}   # consumed by the pipeline command


class _StageError(SystemExit):
    def __init__(self, code: int, message: str):
        click.echo(f"error: {message}", err=True)
        super().__init__(code)


def _check_keys(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ValueError(f"unknown {where} key(s): {', '.join(sorted(unknown))}")


def parse_pipeline_config(obj: dict) -> PipelineConfig:
    """Build a PipelineConfig from a parsed JSON object, rejecting unknown
    keys so typos fail loudly."""
    if not isinstance(obj, dict):
        raise ValueError("config must be a JSON object")
    _check_keys(obj, set(_CONFIG_SECTIONS) | _CONFIG_SCALARS | _CONFIG_IO_KEYS,
                "config")
    for name in _CONFIG_SECTIONS:
        section = obj.get(name, {})
        if not isinstance(section, dict):
            raise ValueError(f"config section '{name}' must be an object")
        _check_keys(section, _CONFIG_SECTIONS[name], f"config.{name}")

    kw: dict = {}
    if "weights" in obj:
        kw["weights"] = CrfWeights(**{k: float(v)
                                      for k, v in obj["weights"].items()})
    if "plane" in obj:
        plane = dict(obj["plane"])
        if "min_inliers" in plane:
            plane["min_inliers"] = int(plane["min_inliers"])
        kw["plane"] = PlaneSearchConfig(**plane)
    kmeans = obj.get("kmeans", {})
    if "k" in kmeans:
        kw["kmeans_k"] = None if kmeans["k"] is None else int(kmeans["k"])
    if "seed" in kmeans:
        kw["kmeans_seed"] = int(kmeans["seed"])
    heights = obj.get("heights", {})
    if "h_min" in heights:
        kw["h_min"] = float(heights["h_min"])
    if "h_max" in heights:
        kw["h_max"] = float(heights["h_max"])
    color = obj.get("color", {})
    if "bin_width" in color:
        kw["bin_width"] = float(color["bin_width"])
    if "variance_floor" in color:
        kw["variance_floor"] = float(color["variance_floor"])
    back = obj.get("backproject", {})
    if "stride" in back:
        kw["stride"] = int(back["stride"])
    if "t_max" in back:
        kw["t_max"] = float(back["t_max"])
    if "bootstrap_threshold" in obj:
        kw["bootstrap_threshold"] = float(obj["bootstrap_threshold"])
    if "refit_interval" in obj:
        kw["refit_interval"] = int(obj["refit_interval"])
    if "refine_plane" in obj:
        kw["refine_plane"] = bool(obj["refine_plane"])
    return PipelineConfig(**kw)


def _load_config(path) -> tuple[PipelineConfig, dict]:
    if path is None:
        return PipelineConfig(), {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None
    return parse_pipeline_config(obj), obj


def _input_stage(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (OSError, ValueError) as exc:
        raise _StageError(EXIT_INPUT_ERROR, str(exc)) from None


def _work_stage(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except NoPlaneFound as exc:
        raise _StageError(EXIT_NO_PLANE, str(exc)) from None
    except OSError as exc:
        raise _StageError(EXIT_INPUT_ERROR, str(exc)) from None
    except _StageError:
        raise
    except Exception as exc:
        raise _StageError(EXIT_INTERNAL, f"{type(exc).__name__}: {exc}") \
            from None


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log per-frame details.")
def main(verbose):
    """Road free-space estimation from priors, probabilities, and graph cuts."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)


@main.command()
@click.option("--config", type=click.Path(exists=True, dir_okay=False),
              help="Scene spec JSON; defaults to the built-in scene.")
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Output directory.")
def synth(config, out):
    """Generate a synthetic scene: clouds, images, score maps, ground truth."""
    def load():
        if config is None:
            return default_scene_spec()
        obj = json.loads(Path(config).read_text(encoding="utf-8"))
        return scene_spec_from_dict(obj)

    spec = _input_stage(load)

    def work():
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        fileio.save_camera(out_dir / "camera.json", spec.camera)
        (out_dir / "scene_spec.json").write_text(
            json.dumps(scene_spec_to_dict(spec), indent=2) + "\n",
            encoding="utf-8")
        for frame in gen_scene(spec):
            i = frame.frame_id
            fileio.write_ply(out_dir / f"cloud_{i:03d}.ply", frame.cloud)
            fileio.save_pose(out_dir / f"pose_{i:03d}.json", frame.pose)
            fileio.write_ppm(out_dir / f"image_{i:03d}.ppm", frame.image)
            fileio.write_probmap(out_dir / f"probs_{i:03d}.pfm2",
                                 frame.prob_map.s_road,
                                 frame.prob_map.s_nonroad_max)
            fileio.write_pgm_mask(out_dir / f"gt_{i:03d}.pgm",
                                  frame.gt_mask.road)
        click.echo(f"wrote {len(spec.trajectory)} frames to {out_dir}")

    _work_stage(work)


@main.command("fit-plane")
@click.option("--cloud", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--pose", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def fit_plane_cmd(cloud, pose, config, out):
    """Fit the road plane to a camera-frame point cloud."""
    def load():
        cfg, _ = _load_config(config)
        return fileio.read_ply(cloud), fileio.load_pose(pose), cfg

    points, keyframe_pose, cfg = _input_stage(load)

    def work():
        result = fit_plane_hough(points, cfg.plane)
        if cfg.refine_plane:
            result = refine_plane_ls(points, result, cfg.plane)
        plane = plane_from_theta_d(result.theta, result.dist, keyframe_pose)
        fileio.save_plane(out, plane)
        click.echo(f"theta={result.theta:.6f} dist={result.dist:.6f} "
                   f"inliers={result.inlier_count}")

    _work_stage(work)


@main.command("fit-boxes")
@click.option("--cloud", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--pose", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--plane", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def fit_boxes_cmd(cloud, pose, plane, config, out):
    """Cluster above-plane points and fit oriented obstacle boxes."""
    def load():
        cfg, _ = _load_config(config)
        return (fileio.read_ply(cloud), fileio.load_pose(pose),
                fileio.load_plane(plane), cfg)

    points, keyframe_pose, road_plane, cfg = _input_stage(load)

    def work():
        world = keyframe_pose.transform(points)
        boxes = fit_frame_boxes(world, road_plane, cfg)
        fileio.save_boxes(out, boxes)
        click.echo(f"fitted {len(boxes)} boxes")

    _work_stage(work)


@main.command()
@click.option("--camera", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--pose", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--plane", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--boxes", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--probs", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--image", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--prev-plane", type=click.Path(exists=True, dir_okay=False))
@click.option("--prev-boxes", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--overlay", type=click.Path(dir_okay=False),
              help="Optional tinted visualization PPM.")
def segment(camera, pose, plane, boxes, probs, image, prev_plane, prev_boxes,
            config, out, overlay):
    """Solve the CRF for one frame and write the road mask."""
    def load():
        cfg, _ = _load_config(config)
        cam = fileio.load_camera(camera)
        img = fileio.read_ppm(image)
        s_road, s_non = fileio.read_probmap(probs)
        prob_map = ProbMap(s_road=s_road, s_nonroad_max=s_non)
        if img.shape[:2] != (cam.height, cam.width):
            raise ValueError(f"{image}: dimensions do not match the camera")
        if prob_map.s_road.shape != (cam.height, cam.width):
            raise ValueError(f"{probs}: dimensions do not match the camera")
        pp = fileio.load_plane(prev_plane) if prev_plane else None
        pb = fileio.load_boxes(prev_boxes) if prev_boxes else None
        return (cfg, cam, fileio.load_pose(pose), fileio.load_plane(plane),
                fileio.load_boxes(boxes), prob_map, img, pp, pb)

    cfg, cam, frame_pose, road_plane, obstacle_boxes, prob_map, img, pp, pb = \
        _input_stage(load)

    def work():
        seg = segment_frame(cam, frame_pose, road_plane, obstacle_boxes,
                            pp, pb, prob_map, img, cfg)
        fileio.write_pgm_mask(out, seg.solve.mask.road)
        if overlay:
            fileio.write_ppm(overlay, export_overlay(img, seg.solve.mask,
                                                     (255, 0, 255)))
        click.echo(f"energy={seg.solve.energy:.6f} flow={seg.solve.flow:.6f}")

    _work_stage(work)


@main.command()
@click.option("--mask", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--camera", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--pose", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--plane", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def backproject(mask, camera, pose, plane, config, out):
    """Lift road pixels to 3D points on the plane and write a PLY cloud."""
    def load():
        cfg, _ = _load_config(config)
        cam = fileio.load_camera(camera)
        road = fileio.read_pgm_mask(mask)
        if road.shape != (cam.height, cam.width):
            raise ValueError(f"{mask}: dimensions do not match the camera")
        return (cfg, cam, road, fileio.load_pose(pose),
                fileio.load_plane(plane))

    cfg, cam, road, frame_pose, road_plane = _input_stage(load)

    def work():
        cloud = backproject_mask(LabelMask(road=road), cam, frame_pose,
                                 road_plane, stride=cfg.stride,
                                 t_max=cfg.t_max)
        fileio.write_ply(out, cloud.points)
        click.echo(f"wrote {cloud.points.shape[0]} points")

    _work_stage(work)


@main.command("eval")
@click.option("--pred", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--gt", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
def eval_cmd(pred, gt, out):
    """Compare a predicted mask against ground truth and write metrics."""
    def load():
        p = fileio.read_pgm_mask(pred)
        g = fileio.read_pgm_mask(gt)
        if p.shape != g.shape:
            raise ValueError("prediction and ground truth dimensions disagree")
        return p, g

    p, g = _input_stage(load)

    def work():
        counts = compare_masks(LabelMask(road=p), LabelMask(road=g))
        write_metrics(out, [(0, counts)])
        m = metrics(counts)
        click.echo(json.dumps(m))

    _work_stage(work)


@main.command("pipeline")
@click.option("--config", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Pipeline config JSON with 'camera' and 'frames' entries.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
def pipeline_cmd(config, out):
    """Run every stage over an ordered frame list from a config file."""
    def load():
        cfg, obj = _load_config(config)
        base = Path(config).parent

        def resolve(p):
            path = Path(p)
            return path if path.is_absolute() else base / path

        if "camera" not in obj:
            raise ValueError(f"{config}: pipeline config needs a 'camera' path")
        if "frames" not in obj or not obj["frames"]:
            raise ValueError(f"{config}: pipeline config needs a non-empty "
                             f"'frames' list")
        cam = fileio.load_camera(resolve(obj["camera"]))
        frames = []
        for i, entry in enumerate(obj["frames"]):
            if not isinstance(entry, dict):
                raise ValueError(f"{config}: frames[{i}] must be an object")
            _check_keys(entry, {"image", "probs", "cloud", "pose", "gt"},
                        f"config.frames[{i}]")
            missing = {"image", "probs", "cloud", "pose"} - set(entry)
            if missing:
                raise ValueError(f"{config}: frames[{i}] missing "
                                 f"{', '.join(sorted(missing))}")
            s_road, s_non = fileio.read_probmap(resolve(entry["probs"]))
            gt_mask = None
            if "gt" in entry:
                gt_mask = LabelMask(
                    road=fileio.read_pgm_mask(resolve(entry["gt"])))
            frames.append(FrameInput(
                image=fileio.read_ppm(resolve(entry["image"])),
                prob_map=ProbMap(s_road=s_road, s_nonroad_max=s_non),
                cloud=fileio.read_ply(resolve(entry["cloud"])),
                pose=fileio.load_pose(resolve(entry["pose"])),
                gt_mask=gt_mask))
        return cfg, cam, frames

    cfg, cam, frames = _input_stage(load)

    def work():
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        results = run_pipeline(cam, frames, cfg)
        for r in results:
            i = r.frame_id
            fileio.write_pgm_mask(out_dir / f"mask_{i:03d}.pgm", r.mask.road)
            fileio.write_ply(out_dir / f"freespace_{i:03d}.ply",
                             r.freespace.points)
            fileio.save_plane(out_dir / f"plane_{i:03d}.json", r.plane)
            fileio.save_boxes(out_dir / f"boxes_{i:03d}.json", r.boxes)
        scored = [(r.frame_id, r.counts) for r in results
                  if r.counts is not None]
        if scored:
            write_metrics(out_dir, scored)
        click.echo(f"processed {len(results)} frames into {out_dir}")

    _work_stage(work)


if __name__ == "__main__":
    main()
