import math

import numpy as np
import pytest

from roadspace.geometry import (
    CameraModel,
    Miss,
    OrientedBox,
    PlaneHit,
    PoseSE3,
    first_hit,
    pixel_ray,
    plane_from_theta_d,
)
from roadspace.priors import (
    CrfWeights,
    IndicatorMap,
    ProbMap,
    UnaryField,
    accumulate_unaries,
    indicator_map,
    transfer_priors,
    unary_from_indicator,
    unary_from_probmap,
    zero_unary,
)

CAM = CameraModel(fx=60.0, fy=60.0, cx=32.0, cy=24.0, width=64, height=48)
IDENT = PoseSE3.identity()


def rot_about(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)


def brute_indicator(cam, pose, plane, boxes):
    out = np.zeros((cam.height, cam.width), dtype=np.uint8)
    for v in range(cam.height):
        for u in range(cam.width):
            hit = first_hit(pixel_ray(cam, pose, float(u), float(v)),
                            plane, boxes)
            out[v, u] = 1 if isinstance(hit, PlaneHit) else 0
    return out


class TestIndicatorMap:
    def test_horizon_split_no_boxes(self):
        plane = plane_from_theta_d(0.0, 1.6, IDENT)
        ind = indicator_map(CAM, IDENT, plane, [])
        ex = brute_indicator(CAM, IDENT, plane, [])
        np.testing.assert_array_equal(ind.values, ex)
        # y axis points up: rays through v < cy aim below the principal axis
        # and reach the road; v >= cy aims level or upward and misses
        assert ind.values[:24, :].all()
        assert ind.values[24:, :].sum() == 0

    def test_box_occludes_center(self):
        plane = plane_from_theta_d(0.0, 1.6, IDENT)
        box = OrientedBox(np.array([0.0, 0.0, 6.0]), np.eye(3),
                          np.array([0.8, 0.8, 0.5]))
        ind = indicator_map(CAM, IDENT, plane, [box])
        ex = brute_indicator(CAM, IDENT, plane, [box])
        np.testing.assert_array_equal(ind.values, ex)
        assert ind.values[24, 32] == 0  # center ray enters the box
        assert ind.values[2, 2] == 1    # steep-down corner ray clears the box

    def test_sky_camera_all_zero(self):
        # camera rotated to look along +y (plane behind every ray)
        pose = PoseSE3(rot_about([1, 0, 0], -math.pi / 2), np.zeros(3))
        plane = plane_from_theta_d(0.0, 1.6, IDENT)
        ind = indicator_map(CAM, pose, plane, [])
        assert ind.values.sum() == 0

    def test_matches_brute_force_random_scenes(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            theta = float(rng.uniform(-0.1, 0.1))
            d = float(rng.uniform(1.0, 2.0))
            plane = plane_from_theta_d(theta, d, IDENT)
            boxes = []
            for _ in range(int(rng.integers(0, 3))):
                c = np.array([rng.uniform(-3, 3), rng.uniform(-1.2, 0.5),
                              rng.uniform(3, 12)])
                boxes.append(OrientedBox(
                    c, rot_about([0, 1, 0], float(rng.uniform(0, 3))),
                    rng.uniform(0.3, 1.2, 3)))
            ind = indicator_map(CAM, IDENT, plane, boxes)
            np.testing.assert_array_equal(
                ind.values, brute_indicator(CAM, IDENT, plane, boxes),
                err_msg=f"seed {seed}")

    def test_values_are_binary(self):
        with pytest.raises(ValueError):
            IndicatorMap(values=np.array([[0, 2]], dtype=np.uint8))


class TestTransferPriors:
    def make_priors(self, seed=0):
        rng = np.random.default_rng(seed)
        pose = PoseSE3(rot_about(rng.normal(size=3), 0.4), rng.normal(size=3))
        plane = plane_from_theta_d(0.05, 1.5, pose)
        boxes = [OrientedBox(rng.normal(size=3) * 3,
                             rot_about(rng.normal(size=3), 1.0),
                             rng.uniform(0.3, 1.5, 3)) for _ in range(2)]
        return plane, boxes

    def test_identity_is_bitwise_noop(self):
        plane, boxes = self.make_priors()
        p2, b2 = transfer_priors(plane, boxes, PoseSE3.identity())
        assert p2 is plane and b2 is boxes

    def test_pure_translation(self):
        plane, boxes = self.make_priors(1)
        shift = np.array([0.0, 0.0, -1.0])
        rel = PoseSE3(np.eye(3), shift)
        p2, b2 = transfer_priors(plane, boxes, rel)
        for b, bt in zip(boxes, b2):
            np.testing.assert_allclose(bt.center, b.center + shift, atol=1e-12)
            np.testing.assert_array_equal(bt.axes, b.axes)
        np.testing.assert_allclose(p2.normal, plane.normal, atol=1e-12)
        assert p2.offset == pytest.approx(
            plane.offset + plane.normal @ shift, abs=1e-12)

    def test_transformed_plane_contains_transformed_points(self):
        plane, _ = self.make_priors(2)
        rng = np.random.default_rng(3)
        rel = PoseSE3(rot_about(rng.normal(size=3), 0.8), rng.normal(size=3))
        p2, _ = transfer_priors(plane, [], rel)
        # sample original plane points via two in-plane directions
        n = plane.normal
        a = np.array([1.0, 0.0, 0.0])
        if abs(n @ a) > 0.9:
            a = np.array([0.0, 1.0, 0.0])
        e1 = a - (a @ n) * n
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        base = n * plane.offset
        for _ in range(100):
            x = base + rng.uniform(-20, 20) * e1 + rng.uniform(-20, 20) * e2
            xt = rel.transform(x)
            assert abs(p2.normal @ xt - p2.offset) < 1e-9

    def test_round_trip(self):
        plane, boxes = self.make_priors(4)
        rng = np.random.default_rng(5)
        rel = PoseSE3(rot_about(rng.normal(size=3), 0.6), rng.normal(size=3))
        p1, b1 = transfer_priors(plane, boxes, rel)
        p2, b2 = transfer_priors(p1, b1, rel.inverse())
        np.testing.assert_allclose(p2.normal, plane.normal, atol=1e-9)
        assert p2.offset == pytest.approx(plane.offset, abs=1e-9)
        for b, bt in zip(boxes, b2):
            np.testing.assert_allclose(bt.center, b.center, atol=1e-9)
            np.testing.assert_allclose(bt.axes, b.axes, atol=1e-9)
            np.testing.assert_allclose(bt.half_extents, b.half_extents,
                                       atol=1e-12)


class TestUnaries:
    def test_indicator_costs(self):
        ind = IndicatorMap(values=np.array([[1, 0]], dtype=np.uint8))
        u = unary_from_indicator(ind, 0.9, 0.9)
        np.testing.assert_array_equal(u.cost_road, [[0.0, 0.9]])
        np.testing.assert_array_equal(u.cost_nonroad, [[0.9, 0.0]])

    def test_indicator_complementary_slack(self):
        rng = np.random.default_rng(6)
        ind = IndicatorMap(values=(rng.random((20, 30)) > 0.5).astype(np.uint8))
        u = unary_from_indicator(ind, 0.9, 0.7)
        assert np.all((u.cost_road == 0) | (u.cost_nonroad == 0))

    def test_indicator_zero_weights(self):
        ind = IndicatorMap(values=np.ones((3, 3), dtype=np.uint8))
        u = unary_from_indicator(ind, 0.0, 0.0)
        assert not u.cost_road.any() and not u.cost_nonroad.any()

    def test_probmap_costs(self):
        probs = ProbMap(s_road=np.array([[0.8]], dtype=np.float32),
                        s_nonroad_max=np.array([[0.15]], dtype=np.float32))
        u = unary_from_probmap(probs, 1.0)
        assert u.cost_road.dtype == np.float64
        assert u.cost_road[0, 0] == pytest.approx(0.15, abs=1e-7)
        assert u.cost_nonroad[0, 0] == pytest.approx(0.8, abs=1e-7)

    def test_probmap_zero_road(self):
        probs = ProbMap(s_road=np.zeros((4, 4)), s_nonroad_max=np.ones((4, 4)))
        u = unary_from_probmap(probs, 1.0)
        assert not u.cost_nonroad.any()

    def test_probmap_scaled(self):
        probs = ProbMap(s_road=np.array([[0.5]]), s_nonroad_max=np.array([[0.5]]))
        u = unary_from_probmap(probs, 2.0)
        assert u.cost_road[0, 0] == 1.0 and u.cost_nonroad[0, 0] == 1.0

    def test_accumulate_hand_sum(self):
        ind = IndicatorMap(values=np.array([[1]], dtype=np.uint8))
        d1 = unary_from_indicator(ind, 0.9, 0.9)
        d2 = unary_from_indicator(ind, 0.9, 0.9)
        probs = ProbMap(s_road=np.array([[0.8]]), s_nonroad_max=np.array([[0.15]]))
        d3 = unary_from_probmap(probs, 1.0)
        total = accumulate_unaries([d1, d2, d3])
        assert total.cost_road[0, 0] == pytest.approx(0.15, abs=1e-12)
        assert total.cost_nonroad[0, 0] == pytest.approx(2.6, abs=1e-12)

    def test_accumulate_zero_identity(self):
        rng = np.random.default_rng(7)
        f = UnaryField(cost_road=rng.random((5, 6)),
                       cost_nonroad=rng.random((5, 6)))
        z = zero_unary(6, 5)
        total = accumulate_unaries([f, z])
        np.testing.assert_array_equal(total.cost_road, f.cost_road)
        np.testing.assert_array_equal(total.cost_nonroad, f.cost_nonroad)

    def test_accumulate_order_invariant(self):
        rng = np.random.default_rng(8)
        a = UnaryField(cost_road=rng.random((3, 3)), cost_nonroad=rng.random((3, 3)))
        b = UnaryField(cost_road=rng.random((3, 3)), cost_nonroad=rng.random((3, 3)))
        ab = accumulate_unaries([a, b])
        ba = accumulate_unaries([b, a])
        np.testing.assert_array_equal(ab.cost_road, ba.cost_road)
        np.testing.assert_array_equal(ab.cost_nonroad, ba.cost_nonroad)

    def test_accumulate_dimension_mismatch(self):
        a = zero_unary(4, 4)
        b = zero_unary(5, 4)
        with pytest.raises(ValueError):
            accumulate_unaries([a, b])

    def test_d2_identity_equals_d1(self):
        plane = plane_from_theta_d(0.02, 1.6, IDENT)
        box = OrientedBox(np.array([0.5, -1.0, 7.0]), np.eye(3),
                          np.array([0.9, 0.6, 0.7]))
        p2, b2 = transfer_priors(plane, [box], PoseSE3.identity())
        d1 = unary_from_indicator(indicator_map(CAM, IDENT, plane, [box]), 0.9, 0.9)
        d2 = unary_from_indicator(indicator_map(CAM, IDENT, p2, b2), 0.9, 0.9)
        np.testing.assert_array_equal(d1.cost_road, d2.cost_road)
        np.testing.assert_array_equal(d1.cost_nonroad, d2.cost_nonroad)


class TestWeights:
    def test_defaults(self):
        w = CrfWeights()
        assert (w.w1, w.w2, w.w3) == (0.9, 0.9, 1.0)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            CrfWeights(w1=-0.1)


class TestProbMapValidation:
    def test_range_check(self):
        with pytest.raises(ValueError):
            ProbMap(s_road=np.array([[1.5]]), s_nonroad_max=np.array([[0.0]]))

    def test_shape_check(self):
        with pytest.raises(ValueError):
            ProbMap(s_road=np.zeros((2, 2)), s_nonroad_max=np.zeros((2, 3)))
