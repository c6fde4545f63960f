"""File codecs: ASCII PLY point clouds, PGM/PPM rasters, two-channel float
probability maps, and the JSON sidecars for cameras, poses, planes and boxes.

All writers are deterministic byte for byte given equal inputs. Floats in text
formats are written with repr, which round-trips float64 exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import CameraModel, OrientedBox, PoseSE3, RoadPlane


# --- ASCII PLY vertex clouds -------------------------------------------------

def write_ply(path, points: np.ndarray) -> None:
    """Write an Nx3 point array as an ASCII PLY vertex list."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an Nx3 array, got shape {pts.shape}")
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {pts.shape[0]}",
        "property float x",
        "property float y",
        "property float z",
        "end_header",
    ]
    lines.extend(f"{x!r} {y!r} {z!r}" for x, y, z in pts.tolist())
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))


def read_ply(path) -> np.ndarray:
    """Read an ASCII PLY vertex list with float properties x, y, z."""
    text = Path(path).read_bytes()
    try:
        header_end = text.index(b"end_header\n")
    except ValueError:
        raise ValueError(f"{path}: missing PLY end_header") from None
    header = text[:header_end].decode("ascii", errors="replace").splitlines()
    body = text[header_end + len(b"end_header\n"):].decode("ascii", errors="replace")
    if not header or header[0].strip() != "ply":
        raise ValueError(f"{path}: not a PLY file")
    n_vertex = None
    props = []
    fmt_ascii = False
    for line in header[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt_ascii = len(parts) > 1 and parts[1] == "ascii"
        elif parts[0] == "element":
            if parts[1] == "vertex":
                n_vertex = int(parts[2])
            elif n_vertex is not None:
                break  # properties after a later element are not vertex props
        elif parts[0] == "property" and n_vertex is not None:
            props.append(parts[-1])
    if not fmt_ascii:
        raise ValueError(f"{path}: only ASCII PLY is supported")
    if n_vertex is None:
        raise ValueError(f"{path}: no vertex element")
    if props[:3] != ["x", "y", "z"]:
        raise ValueError(f"{path}: vertex properties must start with x, y, z")
    rows = body.splitlines()
    if len(rows) < n_vertex:
        raise ValueError(f"{path}: expected {n_vertex} vertices, found {len(rows)}")
    out = np.empty((n_vertex, 3), dtype=np.float64)
    for i in range(n_vertex):
        vals = rows[i].split()
        if len(vals) < 3:
            raise ValueError(f"{path}: malformed vertex line {i}")
        out[i, 0] = float(vals[0])
        out[i, 1] = float(vals[1])
        out[i, 2] = float(vals[2])
    return out


# --- PGM (P5) masks and PPM (P6) images --------------------------------------

def _read_pnm_header(data: bytes, magic: bytes, path) -> tuple[int, int, int]:
    """Parse a binary PNM header, returning (width, height, body offset)."""
    if not data.startswith(magic):
        raise ValueError(f"{path}: expected {magic.decode()} header")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated header")
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported")
    return width, height, pos


def write_pgm_mask(path, road: np.ndarray) -> None:
    """Write a binary road mask as 8-bit PGM, 255 = road."""
    mask = np.asarray(road)
    if mask.ndim != 2:
        raise ValueError(f"expected an HxW mask, got shape {mask.shape}")
    body = np.where(mask.astype(bool), np.uint8(255), np.uint8(0))
    header = f"P5\n{mask.shape[1]} {mask.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + body.tobytes())


def read_pgm_mask(path) -> np.ndarray:
    """Read an 8-bit PGM road mask. Pixels must be exactly 0 or 255."""
    data = Path(path).read_bytes()
    width, height, pos = _read_pnm_header(data, b"P5", path)
    body = data[pos:pos + width * height]
    if len(body) != width * height:
        raise ValueError(f"{path}: truncated pixel data")
    values = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
    if not np.all((values == 0) | (values == 255)):
        raise ValueError(f"{path}: mask pixels must be 0 or 255")
    return values == 255


def write_ppm(path, image: np.ndarray) -> None:
    """Write an HxWx3 uint8 image as binary PPM."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("expected an HxWx3 uint8 image")
    header = f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    width, height, pos = _read_pnm_header(data, b"P6", path)
    body = data[pos:pos + width * height * 3]
    if len(body) != width * height * 3:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3).copy()


# --- Two-channel float32 probability maps ------------------------------------

PROBMAP_MAGIC = b"PFM2\n"


def write_probmap(path, s_road: np.ndarray, s_nonroad_max: np.ndarray) -> None:
    """Write the two-channel probability map format.

    Layout: magic, ASCII "width height\\n", then 2*width*height little-endian
    float32 values, row-major, interleaved (s_road, s_nonroad_max) per pixel.
    """
    sr = np.asarray(s_road, dtype="<f4")
    sn = np.asarray(s_nonroad_max, dtype="<f4")
    if sr.ndim != 2 or sr.shape != sn.shape:
        raise ValueError("channels must be equal-shape HxW arrays")
    h, w = sr.shape
    payload = np.empty((h, w, 2), dtype="<f4")
    payload[..., 0] = sr
    payload[..., 1] = sn
    header = PROBMAP_MAGIC + f"{w} {h}\n".encode("ascii")
    Path(path).write_bytes(header + payload.tobytes())


def read_probmap(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-channel probability map; returns float32 (s_road, s_nonroad_max)."""
    data = Path(path).read_bytes()
    if not data.startswith(PROBMAP_MAGIC):
        raise ValueError(f"{path}: bad probability map magic")
    eol = data.find(b"\n", len(PROBMAP_MAGIC))
    if eol < 0:
        raise ValueError(f"{path}: truncated header")
    try:
        w, h = (int(x) for x in data[len(PROBMAP_MAGIC):eol].split())
    except ValueError:
        raise ValueError(f"{path}: malformed dimensions") from None
    body = data[eol + 1:]
    expected = 2 * w * h * 4
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, got {len(body)}")
    payload = np.frombuffer(body, dtype="<f4").reshape(h, w, 2)
    return payload[..., 0].copy(), payload[..., 1].copy()


# --- JSON sidecars ------------------------------------------------------------

def _load_json(path) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, (dict, list)):
        raise ValueError(f"{path}: expected a JSON object")
    return obj


def _dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def save_camera(path, cam: CameraModel) -> None:
    _dump_json(path, {"fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
                      "width": cam.width, "height": cam.height})


def load_camera(path) -> CameraModel:
    obj = _load_json(path)
    try:
        return CameraModel(fx=float(obj["fx"]), fy=float(obj["fy"]),
                           cx=float(obj["cx"]), cy=float(obj["cy"]),
                           width=int(obj["width"]), height=int(obj["height"]))
    except KeyError as exc:
        raise ValueError(f"{path}: missing camera field {exc}") from None


def save_pose(path, pose: PoseSE3) -> None:
    _dump_json(path, {"rotation": [float(x) for x in pose.rotation.ravel()],
                      "translation": [float(x) for x in pose.translation]})


def _pose_from_obj(obj, path) -> PoseSE3:
    try:
        rot = np.asarray(obj["rotation"], dtype=np.float64)
        trans = np.asarray(obj["translation"], dtype=np.float64)
    except KeyError as exc:
        raise ValueError(f"{path}: missing pose field {exc}") from None
    if rot.shape == (9,):
        rot = rot.reshape(3, 3)  # row-major
    return PoseSE3(rot, trans)


def load_pose(path) -> PoseSE3:
    return _pose_from_obj(_load_json(path), path)


def save_plane(path, plane: RoadPlane) -> None:
    _dump_json(path, {
        "theta": plane.theta,
        "dist": plane.dist,
        "pose": {"rotation": [float(x) for x in plane.keyframe_pose.rotation.ravel()],
                 "translation": [float(x) for x in plane.keyframe_pose.translation]},
        "normal": [float(x) for x in plane.normal],
        "offset": plane.offset,
    })


def load_plane(path) -> RoadPlane:
    obj = _load_json(path)
    try:
        pose = _pose_from_obj(obj["pose"], path)
        return RoadPlane(theta=float(obj["theta"]), dist=float(obj["dist"]),
                         keyframe_pose=pose,
                         normal=np.asarray(obj["normal"], dtype=np.float64),
                         offset=float(obj["offset"]))
    except KeyError as exc:
        raise ValueError(f"{path}: missing plane field {exc}") from None


def save_boxes(path, boxes: list[OrientedBox]) -> None:
    _dump_json(path, [{
        "center": [float(x) for x in b.center],
        "axes": [[float(x) for x in row] for row in b.axes],
        "half_extents": [float(x) for x in b.half_extents],
    } for b in boxes])


def load_boxes(path) -> list[OrientedBox]:
    obj = _load_json(path)
    if not isinstance(obj, list):
        raise ValueError(f"{path}: expected a JSON list of boxes")
    boxes = []
    for i, item in enumerate(obj):
        try:
            boxes.append(OrientedBox(
                center=np.asarray(item["center"], dtype=np.float64),
                axes=np.asarray(item["axes"], dtype=np.float64),
                half_extents=np.asarray(item["half_extents"], dtype=np.float64)))
        except KeyError as exc:
            raise ValueError(f"{path}: box {i} missing field {exc}") from None
    return boxes
