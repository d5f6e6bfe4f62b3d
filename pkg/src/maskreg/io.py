"""File formats: MRD depth images, pose graphs, reports and CSV tables.

MRD v1 layout::

    MRD1
    width 160
    height 120
    focal 140.0
    principal 79.5 59.5
    sigma 0.002
    r_min 0.05
    r_max 10.0
    end_header
    <width*height records: uint8 state, float32 little-endian depth>

A ``noise_cov`` line with nine values is written only when the noise is
not isotropic.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .depthimage import CameraModel, DepthImage
from .geometry import RigidTransform, log6
from .posegraph import PoseGraph

MAGIC = "MRD1"
_RECORD = np.dtype([("state", "u1"), ("depth", "<f4")])


class FormatError(ValueError):
    pass


def _fmt(x) -> str:
    return repr(float(x))


# -- depth images ---------------------------------------------------------

def encode_mrd(img: DepthImage) -> bytes:
    cam = img.camera
    lines = [
        MAGIC,
        f"width {cam.width}",
        f"height {cam.height}",
        f"focal {_fmt(cam.focal)}",
        f"principal {_fmt(cam.cx)} {_fmt(cam.cy)}",
        f"sigma {_fmt(cam.sigma)}",
        f"r_min {_fmt(cam.r_min)}",
        f"r_max {_fmt(cam.r_max)}",
    ]
    if not np.array_equal(cam.L, cam.sigma**2 * np.eye(3)):
        lines.append("noise_cov " + " ".join(_fmt(v) for v in cam.L.ravel()))
    lines.append("end_header")
    rec = np.empty(img.state.size, dtype=_RECORD)
    rec["state"] = img.state.ravel()
    rec["depth"] = img.depth.ravel()
    return ("\n".join(lines) + "\n").encode("ascii") + rec.tobytes()


def decode_mrd(data: bytes) -> DepthImage:
    end = data.find(b"end_header\n")
    if not data.startswith(MAGIC.encode() + b"\n") or end < 0:
        raise FormatError("not an MRD1 file")
    header = {}
    for line in data[:end].decode("ascii").splitlines()[1:]:
        if line.strip():
            key, *vals = line.split()
            header[key] = vals
    payload = data[end + len(b"end_header\n"):]
    try:
        width = int(header["width"][0])
        height = int(header["height"][0])
        cx, cy = (float(v) for v in header["principal"])
        kwargs = dict(
            width=width,
            height=height,
            focal=float(header["focal"][0]),
            cx=cx,
            cy=cy,
            sigma=float(header["sigma"][0]),
            r_min=float(header["r_min"][0]),
        )
        if "r_max" in header:
            kwargs["r_max"] = float(header["r_max"][0])
        if "noise_cov" in header:
            kwargs["noise_cov"] = np.array([float(v) for v in header["noise_cov"]]).reshape(3, 3)
    except (KeyError, IndexError, ValueError) as exc:
        raise FormatError(f"bad MRD header: {exc}") from exc
    if width <= 0 or height <= 0:
        raise FormatError("image size must be positive")
    if len(payload) != width * height * _RECORD.itemsize:
        raise FormatError(f"payload has {len(payload)} bytes, expected {width * height * _RECORD.itemsize}")
    rec = np.frombuffer(payload, dtype=_RECORD)
    state = rec["state"].reshape(height, width)
    depth = rec["depth"].astype(np.float64).reshape(height, width)
    try:
        return DepthImage(CameraModel(**kwargs), state, depth)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def write_mrd(path, img: DepthImage):
    Path(path).write_bytes(encode_mrd(img))


def read_mrd(path) -> DepthImage:
    return decode_mrd(Path(path).read_bytes())


# -- transforms -----------------------------------------------------------

def pose_to_vector(T: RigidTransform) -> np.ndarray:
    """Tangent 6-vector; unlike :func:`log6` this also accepts half turns."""
    return np.concatenate([Rotation.from_matrix(T.rotation).as_rotvec(), T.translation])


def vector_to_pose(v) -> RigidTransform:
    v = np.asarray(v, dtype=float)
    return RigidTransform(Rotation.from_rotvec(v[:3]).as_matrix(), v[3:6])


# -- pose graphs ----------------------------------------------------------

def format_graph(graph: PoseGraph, poses=None) -> str:
    poses = graph.nodes if poses is None else poses
    iu = np.triu_indices(6)
    out = ["# NODE id rx ry rz tx ty tz", "# EDGE from to rx ry rz tx ty tz info_upper[21]"]
    for n, X in poses.items():
        out.append(f"NODE {n} " + " ".join(_fmt(v) for v in pose_to_vector(X)))
    for e in graph.edges:
        vals = list(pose_to_vector(e.measurement)) + list(e.information[iu])
        out.append(f"EDGE {e.source} {e.target} " + " ".join(_fmt(v) for v in vals))
    return "\n".join(out) + "\n"


def parse_graph(text: str) -> PoseGraph:
    graph = PoseGraph()
    iu = np.triu_indices(6)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "NODE" and len(tok) == 8:
                graph.add_node(int(tok[1]), vector_to_pose([float(v) for v in tok[2:]]))
            elif tok[0] == "EDGE" and len(tok) == 30:
                vals = np.array([float(v) for v in tok[3:]])
                info = np.zeros((6, 6))
                info[iu] = vals[6:]
                info = info + np.triu(info, 1).T
                graph.add_edge(int(tok[1]), int(tok[2]), vector_to_pose(vals[:6]), info)
            else:
                raise FormatError(f"unrecognized record {tok[0]!r}")
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise FormatError(f"line {lineno}: {exc}") from exc
    return graph


def write_graph(path, graph: PoseGraph, poses=None):
    Path(path).write_text(format_graph(graph, poses))


def read_graph(path) -> PoseGraph:
    return parse_graph(Path(path).read_text())


# -- tables ---------------------------------------------------------------

TRANSFORM_FIELDS = ["source", "target", "rx", "ry", "rz", "tx", "ty", "tz"]


def write_transforms_csv(path, rows):
    """``rows`` of ``(source, target, RigidTransform)``."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRANSFORM_FIELDS)
        for a, b, T in rows:
            w.writerow([a, b] + [_fmt(v) for v in pose_to_vector(T)])


def read_transforms_csv(path):
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != TRANSFORM_FIELDS:
            raise FormatError(f"{path}: expected columns {TRANSFORM_FIELDS}")
        for r in reader:
            v = [float(r[k]) for k in TRANSFORM_FIELDS[2:]]
            rows.append((int(r["source"]), int(r["target"]), vector_to_pose(v)))
    return rows


def write_samples_csv(path, posterior):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["rx", "ry", "rz", "tx", "ty", "tz", "log_weight", "weight"])
        for R, t, lw, wt in zip(posterior.rotations, posterior.translations, posterior.log_weights, posterior.weights):
            v = pose_to_vector(RigidTransform(R, t))
            w.writerow([_fmt(x) for x in v] + [_fmt(lw), _fmt(wt)])


def posterior_report(posterior, extra=None) -> dict:
    rep = {
        "mean": [float(v) for v in log6(posterior.mean)],
        "covariance": [[float(v) for v in row] for row in posterior.covariance],
        "effective_sample_size": float(posterior.effective_sample_size),
        "rejected": int(posterior.rejected_count),
        "evaluated": int(posterior.evaluated_count),
    }
    if extra:
        rep.update(extra)
    return rep


def dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_cloud(path, points):
    with open(path, "w") as f:
        for p in np.asarray(points, dtype=float).reshape(-1, 3):
            f.write(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}\n")
