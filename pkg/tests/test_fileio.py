import math

import numpy as np
import pytest

from roadspace.fileio import (
    load_boxes,
    load_camera,
    load_plane,
    load_pose,
    read_pgm_mask,
    read_ply,
    read_ppm,
    read_probmap,
    save_boxes,
    save_camera,
    save_plane,
    save_pose,
    write_pgm_mask,
    write_ply,
    write_ppm,
    write_probmap,
)
from roadspace.geometry import CameraModel, OrientedBox, PoseSE3, plane_from_theta_d


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


class TestPly:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        pts = rng.normal(scale=10.0, size=(500, 3))
        path = tmp_path / "cloud.ply"
        write_ply(path, pts)
        back = read_ply(path)
        np.testing.assert_array_equal(back, pts)  # bitwise, repr round-trips

    def test_empty_cloud(self, tmp_path):
        path = tmp_path / "empty.ply"
        write_ply(path, np.empty((0, 3)))
        assert read_ply(path).shape == (0, 3)

    def test_header_shape(self, tmp_path):
        path = tmp_path / "c.ply"
        write_ply(path, np.array([[1.0, 2.0, 3.0]]))
        text = path.read_text()
        assert text.startswith("ply\nformat ascii 1.0\nelement vertex 1\n")
        assert "property float x" in text

    def test_reads_extra_vertex_properties(self, tmp_path):
        path = tmp_path / "rgb.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 2\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property uchar red\n"
            "end_header\n"
            "1.0 2.0 3.0 255\n4.0 5.0 6.0 0\n")
        np.testing.assert_array_equal(read_ply(path),
                                      [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])

    def test_rejects_binary(self, tmp_path):
        path = tmp_path / "b.ply"
        path.write_bytes(b"ply\nformat binary_little_endian 1.0\n"
                         b"element vertex 0\nend_header\n")
        with pytest.raises(ValueError):
            read_ply(path)

    def test_rejects_wrong_shape(self, tmp_path):
        with pytest.raises(ValueError):
            write_ply(tmp_path / "x.ply", np.zeros((4, 2)))


class TestPgmPpm:
    def test_mask_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        mask = rng.random((48, 64)) > 0.5
        path = tmp_path / "m.pgm"
        write_pgm_mask(path, mask)
        np.testing.assert_array_equal(read_pgm_mask(path), mask)

    def test_mask_encoding(self, tmp_path):
        path = tmp_path / "m.pgm"
        write_pgm_mask(path, np.array([[True, False]]))
        data = path.read_bytes()
        assert data == b"P5\n2 1\n255\n\xff\x00"

    def test_rejects_gray_values(self, tmp_path):
        path = tmp_path / "g.pgm"
        path.write_bytes(b"P5\n2 1\n255\n\x80\x00")
        with pytest.raises(ValueError):
            read_pgm_mask(path)

    def test_ppm_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, size=(24, 32, 3), dtype=np.uint8)
        path = tmp_path / "i.ppm"
        write_ppm(path, img)
        np.testing.assert_array_equal(read_ppm(path), img)

    def test_header_comment_tolerated(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# a comment\n1 1\n255\n\xff")
        np.testing.assert_array_equal(read_pgm_mask(path), [[True]])

    def test_truncated_body(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n4 4\n255\n\x00\x00")
        with pytest.raises(ValueError):
            read_pgm_mask(path)


class TestProbmap:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(4)
        sr = rng.random((30, 40)).astype(np.float32)
        sn = rng.random((30, 40)).astype(np.float32)
        path = tmp_path / "p.pfm2"
        write_probmap(path, sr, sn)
        sr2, sn2 = read_probmap(path)
        assert sr2.dtype == np.float32 and sn2.dtype == np.float32
        np.testing.assert_array_equal(sr2, sr)
        np.testing.assert_array_equal(sn2, sn)

    def test_layout(self, tmp_path):
        path = tmp_path / "p.pfm2"
        sr = np.array([[0.25, 0.5]], dtype=np.float32)
        sn = np.array([[0.75, 1.0]], dtype=np.float32)
        write_probmap(path, sr, sn)
        data = path.read_bytes()
        assert data.startswith(b"PFM2\n2 1\n")
        vals = np.frombuffer(data[len(b"PFM2\n2 1\n"):], dtype="<f4")
        np.testing.assert_array_equal(vals, [0.25, 0.75, 0.5, 1.0])

    def test_shape_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            write_probmap(tmp_path / "x.pfm2", np.zeros((2, 2), np.float32),
                          np.zeros((2, 3), np.float32))

    def test_truncated(self, tmp_path):
        path = tmp_path / "t.pfm2"
        path.write_bytes(b"PFM2\n4 4\n" + b"\x00" * 10)
        with pytest.raises(ValueError):
            read_probmap(path)


class TestJsonSidecars:
    def test_camera_round_trip(self, tmp_path):
        cam = CameraModel(fx=525.0, fy=525.0, cx=320.0, cy=240.0,
                          width=640, height=480)
        path = tmp_path / "cam.json"
        save_camera(path, cam)
        assert load_camera(path) == cam

    def test_pose_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        pose = PoseSE3(random_rotation(rng), rng.normal(size=3))
        path = tmp_path / "pose.json"
        save_pose(path, pose)
        back = load_pose(path)
        np.testing.assert_array_equal(back.rotation, pose.rotation)
        np.testing.assert_array_equal(back.translation, pose.translation)

    def test_pose_rotation_is_row_major(self, tmp_path):
        c, s = math.cos(0.3), math.sin(0.3)
        rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        path = tmp_path / "pose.json"
        save_pose(path, PoseSE3(rot, np.zeros(3)))
        import json
        flat = json.loads(path.read_text())["rotation"]
        np.testing.assert_array_equal(np.array(flat).reshape(3, 3), rot)

    def test_plane_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        pose = PoseSE3(random_rotation(rng), rng.normal(size=3))
        plane = plane_from_theta_d(0.03, 1.6, pose)
        path = tmp_path / "plane.json"
        save_plane(path, plane)
        back = load_plane(path)
        assert back.theta == plane.theta and back.dist == plane.dist
        np.testing.assert_array_equal(back.normal, plane.normal)
        assert back.offset == plane.offset

    def test_boxes_round_trip(self, tmp_path):
        rng = np.random.default_rng(7)
        boxes = [OrientedBox(rng.normal(size=3), random_rotation(rng),
                             rng.uniform(0.2, 2.0, size=3)) for _ in range(3)]
        path = tmp_path / "boxes.json"
        save_boxes(path, boxes)
        back = load_boxes(path)
        assert len(back) == 3
        for a, b in zip(back, boxes):
            np.testing.assert_array_equal(a.center, b.center)
            np.testing.assert_array_equal(a.axes, b.axes)
            np.testing.assert_array_equal(a.half_extents, b.half_extents)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"fx": 1.0}')
        with pytest.raises(ValueError):
            load_camera(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ValueError):
            load_camera(path)
