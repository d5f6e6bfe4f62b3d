"""Error metrics and sequence-level runs for both registration backends."""
from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from . import icp as icp_mod
from . import posegraph
from .depthimage import DepthImage, object_cloud_cartesian
from .geometry import RigidTransform, rotation_angle
from .io import read_mrd
from .registrar import RegistrationConfig, register

BACKENDS = ("maskreg", "icp")


def alignment_error(estimate: RigidTransform, truth: RigidTransform) -> tuple[float, float]:
    """(geodesic rotation error in degrees, translation error in millimetres)."""
    dR = truth.rotation.T @ estimate.rotation
    return float(np.degrees(rotation_angle(dR))), 1000.0 * float(np.linalg.norm(estimate.translation - truth.translation))


def pair_errors(estimates, truths) -> np.ndarray:
    if len(estimates) != len(truths):
        raise ValueError(f"{len(estimates)} estimates but {len(truths)} ground-truth transforms")
    return np.array([alignment_error(e, t) for e, t in zip(estimates, truths)]).reshape(-1, 2)


def summarize(errors) -> dict:
    """Median, quartiles and maximum of the rotation and translation columns."""
    e = np.asarray(errors, dtype=float).reshape(-1, 2)
    out = {"n": len(e)}
    for col, name in ((0, "deg"), (1, "mm")):
        q1, med, q3 = np.percentile(e[:, col], [25, 50, 75]) if len(e) else (np.nan,) * 3
        out[f"median_{name}"] = float(med)
        out[f"q1_{name}"] = float(q1)
        out[f"q3_{name}"] = float(q3)
        out[f"max_{name}"] = float(e[:, col].max()) if len(e) else float("nan")
    return out


def load_sequence(directory) -> list[DepthImage]:
    paths = sorted(Path(directory).glob("*.mrd"))
    if not paths:
        raise FileNotFoundError(f"no .mrd files in {directory}")
    return [read_mrd(p) for p in paths]


def register_pairs(images, pairs, prior, config: RegistrationConfig):
    """Posterior for each ``(a, b)`` index pair, each with its own seed stream."""
    seeds = np.random.SeedSequence(config.seed).generate_state(len(pairs), dtype=np.uint64)
    out = []
    for (a, b), s in zip(pairs, seeds):
        out.append(register(images[a], images[b], prior, replace(config, seed=int(s))))
    return out


def icp_pairs(images, pairs, init=RigidTransform.identity(), config=icp_mod.IcpConfig()):
    return [
        icp_mod.icp(object_cloud_cartesian(images[a]), object_cloud_cartesian(images[b]), init, config)
        for a, b in pairs
    ]


def sequence_graph(images, posteriors, pairs) -> posegraph.PoseGraph:
    """Pose graph with dead-reckoned initial poses from the chain edges ``(k, k+1)``."""
    n = len(images)
    chain = {}
    for (a, b), post in zip(pairs, posteriors):
        if b == a + 1:
            chain[a] = post.mean
    if sorted(chain) != list(range(n - 1)):
        raise posegraph.DisconnectedGraphError("sequence needs a registration for every consecutive pair")
    graph = posegraph.PoseGraph()
    for k, X in enumerate(posegraph.dead_reckoning([chain[k] for k in range(n - 1)])):
        graph.add_node(k, X)
    for (a, b), post in zip(pairs, posteriors):
        posegraph.add_registration(graph, a, b, post.mean, post.covariance)
    return graph


def fused_cloud(images, poses) -> np.ndarray:
    """Object points of every frame mapped into the frame of node 0."""
    parts = [poses[k].apply(object_cloud_cartesian(img)) for k, img in enumerate(images)]
    return np.concatenate(parts) if parts else np.zeros((0, 3))
