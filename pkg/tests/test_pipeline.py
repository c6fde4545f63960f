import logging

import numpy as np
import pytest

from roadspace.errors import NoPlaneFound
from roadspace.geometry import CameraModel, PoseSE3
from roadspace.pipeline import (FrameInput, PipelineConfig, fit_frame_boxes,
                                fit_frame_plane, ingest_softmax,
                                run_pipeline, segment_frame)
from roadspace.obstacles import fit_obstacles
from roadspace.priors import ProbMap
from roadspace.synth import SceneSpec, box_on_plane, gen_scene

SMALL_CAM = CameraModel(fx=52.5, fy=52.5, cx=32.0, cy=24.0,
                        width=64, height=48)


def small_scene(n_frames=2, **overrides):
    fields = dict(
        theta=0.03,
        dist=1.6,
        boxes=(box_on_plane(0.03, 1.6, 0.0, 8.0),),
        camera=SMALL_CAM,
        trajectory=tuple(PoseSE3(np.eye(3), np.array([0.0, 0.0, float(k)]))
                         for k in range(n_frames)),
        cloud_density=1.5,
        rng_seed=13,
    )
    fields.update(overrides)
    return SceneSpec(**fields)


def as_inputs(frames, with_gt=True):
    return [FrameInput(image=f.image, prob_map=f.prob_map, cloud=f.cloud,
                       pose=f.pose, gt_mask=f.gt_mask if with_gt else None)
            for f in frames]


def test_ingest_softmax_examples():
    h, w = 2, 3
    maps = np.stack([np.full((h, w), v) for v in (0.7, 0.2, 0.1)])
    pm = ingest_softmax(maps, 0)
    np.testing.assert_array_equal(pm.s_road, 0.7)
    np.testing.assert_array_equal(pm.s_nonroad_max, 0.2)

    pm = ingest_softmax(np.full((2, h, w), 0.5), 1)
    np.testing.assert_array_equal(pm.s_road, 0.5)
    np.testing.assert_array_equal(pm.s_nonroad_max, 0.5)

    pm = ingest_softmax(np.full((12, h, w), 1.0 / 12.0), 5)
    np.testing.assert_allclose(pm.s_road, 1.0 / 12.0)
    np.testing.assert_allclose(pm.s_nonroad_max, 1.0 / 12.0)


def test_ingest_softmax_picks_strongest_other_class():
    maps = np.zeros((4, 1, 2))
    maps[:, 0, 0] = [0.1, 0.5, 0.3, 0.1]
    maps[:, 0, 1] = [0.6, 0.1, 0.05, 0.25]
    pm = ingest_softmax(maps, 2)
    np.testing.assert_allclose(pm.s_road, [[0.3, 0.05]])
    np.testing.assert_allclose(pm.s_nonroad_max, [[0.5, 0.6]])


def test_ingest_softmax_validation():
    ok = np.full((3, 2, 2), 0.2)
    with pytest.raises(ValueError):
        ingest_softmax(ok, 3)
    with pytest.raises(ValueError):
        ingest_softmax(ok, -1)
    with pytest.raises(ValueError):
        ingest_softmax(ok[:1], 0)
    with pytest.raises(ValueError):
        ingest_softmax(np.full((2, 2, 2), 1.5), 0)


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(bootstrap_threshold=0.0)
    with pytest.raises(ValueError):
        PipelineConfig(bootstrap_threshold=1.0)
    with pytest.raises(ValueError):
        PipelineConfig(refit_interval=0)
    with pytest.raises(ValueError):
        PipelineConfig(stride=0)


def test_identity_transfer_makes_d2_equal_d1():
    spec = small_scene()
    frame = gen_scene(spec)[0]
    cfg = PipelineConfig()
    plane = fit_frame_plane(frame.cloud, frame.pose, cfg)
    world = frame.pose.transform(frame.cloud)
    boxes = fit_obstacles(world, plane, seed=cfg.kmeans_seed)

    first = segment_frame(spec.camera, frame.pose, plane, boxes, None, None,
                          frame.prob_map, frame.image, cfg)
    assert not first.d2.cost_road.any() and not first.d2.cost_nonroad.any()

    again = segment_frame(spec.camera, frame.pose, plane, boxes, plane, boxes,
                          frame.prob_map, frame.image, cfg)
    np.testing.assert_array_equal(again.d2.cost_road, again.d1.cost_road)
    np.testing.assert_array_equal(again.d2.cost_nonroad,
                                  again.d1.cost_nonroad)


def test_run_pipeline_produces_consistent_frames():
    spec = small_scene()
    results = run_pipeline(SMALL_CAM, as_inputs(gen_scene(spec)))
    assert [r.frame_id for r in results] == [0, 1]
    for r in results:
        assert r.mask.road.shape == (48, 64)
        assert np.isfinite(r.energy) and np.isfinite(r.flow)
        assert r.metrics is not None and r.counts is not None
        assert r.counts.total() == 48 * 64
        resid = r.freespace.points @ r.plane.normal - r.plane.offset
        assert resid.size > 0 and np.abs(resid).max() <= 1e-6
        assert r.metrics["fval"] is None or r.metrics["fval"] <= 1.0


def test_run_pipeline_is_deterministic():
    spec = small_scene()
    a = run_pipeline(SMALL_CAM, as_inputs(gen_scene(spec)))
    b = run_pipeline(SMALL_CAM, as_inputs(gen_scene(spec)))
    for ra, rb in zip(a, b):
        assert ra.mask.road.tobytes() == rb.mask.road.tobytes()
        assert ra.freespace.points.tobytes() == rb.freespace.points.tobytes()
        assert ra.energy == rb.energy


def test_no_gt_means_no_metrics():
    spec = small_scene(n_frames=1)
    results = run_pipeline(SMALL_CAM, as_inputs(gen_scene(spec),
                                                with_gt=False))
    assert results[0].metrics is None and results[0].counts is None


def test_plane_failure_on_first_frame_aborts():
    rng = np.random.default_rng(0)
    frames = gen_scene(small_scene(n_frames=1))
    junk = FrameInput(image=frames[0].image, prob_map=frames[0].prob_map,
                      cloud=rng.uniform(-10, 10, (2000, 3)),
                      pose=frames[0].pose)
    with pytest.raises(NoPlaneFound):
        run_pipeline(SMALL_CAM, [junk])


def test_plane_failure_later_reuses_previous_plane(caplog):
    rng = np.random.default_rng(1)
    frames = gen_scene(small_scene())
    good = as_inputs(frames)[0]
    junk = FrameInput(image=frames[1].image, prob_map=frames[1].prob_map,
                      cloud=rng.uniform(-10, 10, (2000, 3)),
                      pose=frames[1].pose)
    with caplog.at_level(logging.WARNING, logger="roadspace.pipeline"):
        results = run_pipeline(SMALL_CAM, [good, junk])
    assert results[1].plane is results[0].plane
    assert any("reusing previous plane" in r.message for r in caplog.records)


def test_underdetermined_color_model_disables_smoothing(caplog):
    spec = small_scene(n_frames=1)
    frame = gen_scene(spec)[0]
    cfg = PipelineConfig()
    plane = fit_frame_plane(frame.cloud, frame.pose, cfg)
    # a probability map with almost no confident road pixels starves the
    # color-model bootstrap
    lo = np.full(frame.prob_map.s_road.shape, 0.1, dtype=np.float32)
    hi = np.full_like(lo, 0.9)
    starved = ProbMap(s_road=lo, s_nonroad_max=hi)
    with caplog.at_level(logging.WARNING, logger="roadspace.pipeline"):
        seg = segment_frame(spec.camera, frame.pose, plane, [], None, None,
                            starved, frame.image, cfg)
    assert not seg.color_model_ok
    assert not seg.pairwise.right.any() and not seg.pairwise.down.any()
    # with no smoothing the cut degenerates to the per-pixel unary argmin
    total_road = seg.d1.cost_road + seg.d2.cost_road + seg.d3.cost_road
    total_non = seg.d1.cost_nonroad + seg.d2.cost_nonroad + seg.d3.cost_nonroad
    np.testing.assert_array_equal(seg.solve.mask.road, total_road < total_non)


def test_dimension_mismatch_rejected():
    frames = gen_scene(small_scene(n_frames=1))
    wrong_cam = CameraModel(fx=52.5, fy=52.5, cx=16.0, cy=12.0,
                            width=32, height=24)
    with pytest.raises(ValueError):
        run_pipeline(wrong_cam, as_inputs(frames))


def test_refit_interval_skips_intermediate_fits():
    spec = small_scene(n_frames=3,
                       trajectory=tuple(
                           PoseSE3(np.eye(3), np.array([0.0, 0.0, float(k)]))
                           for k in range(3)))
    inputs = as_inputs(gen_scene(spec))
    results = run_pipeline(SMALL_CAM, inputs,
                           PipelineConfig(refit_interval=2))
    # frames 0 and 2 refit; frame 1 reuses frame 0's plane object
    assert results[1].plane is results[0].plane
    assert results[2].plane is not results[0].plane


def test_frame_boxes_one_per_obstacle_and_grounded():
    spec = small_scene(boxes=(box_on_plane(0.03, 1.6, -2.0, 8.0),
                              box_on_plane(0.03, 1.6, 2.5, 15.0)),
                       cloud_density=6.0)
    frame = gen_scene(spec)[0]
    cfg = PipelineConfig()
    plane = fit_frame_plane(frame.cloud, frame.pose, cfg)
    world = frame.pose.transform(frame.cloud)
    boxes = fit_frame_boxes(world, plane, cfg)
    assert len(boxes) == 2
    for box in boxes:
        bottom = float(box.center @ plane.normal - plane.offset
                       - box.half_extents[2])
        assert abs(bottom) <= 1e-9


def test_frame_boxes_explicit_k_respected():
    spec = small_scene(cloud_density=6.0)
    frame = gen_scene(spec)[0]
    cfg = PipelineConfig(kmeans_k=3)
    plane = fit_frame_plane(frame.cloud, frame.pose, cfg)
    world = frame.pose.transform(frame.cloud)
    assert 1 <= len(fit_frame_boxes(world, plane, cfg)) <= 3


def test_frame_boxes_empty_band():
    spec = small_scene(boxes=())
    frame = gen_scene(spec)[0]
    cfg = PipelineConfig()
    plane = fit_frame_plane(frame.cloud, frame.pose, cfg)
    assert fit_frame_boxes(frame.pose.transform(frame.cloud), plane, cfg) == []
