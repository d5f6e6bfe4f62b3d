"""Pose-graph loop closure with Levenberg-Marquardt.

An edge ``(i, j, Z, Omega)`` measures ``X_i^-1 o X_j`` with residual
``log6(Z^-1 o X_i^-1 o X_j)`` and information ``Omega``. Updates are applied
on the right, ``X <- X o exp6(delta)``. The first node is held fixed.

A registration of image ``a`` onto image ``b`` (transform ``T`` carrying
the object from ``a`` to ``b``) becomes the edge ``(b, a, T)`` when node
poses map each frame back into the frame of node 0; see
:func:`add_registration`.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import RigidTransform, compose, exp6, invert, log6


class DisconnectedGraphError(ValueError):
    pass


@dataclass(frozen=True)
class PoseEdge:
    source: int
    target: int
    measurement: RigidTransform
    information: np.ndarray

    def __post_init__(self):
        info = np.asarray(self.information, dtype=float)
        if info.shape != (6, 6):
            raise ValueError("information must be 6x6")
        info = 0.5 * (info + info.T)
        if np.min(np.linalg.eigvalsh(info)) <= 0:
            raise ValueError("information must be positive definite")
        object.__setattr__(self, "information", info)


@dataclass
class PoseGraph:
    nodes: dict = field(default_factory=dict)  # id -> RigidTransform
    edges: list = field(default_factory=list)

    def add_node(self, node_id: int, pose: RigidTransform):
        if node_id in self.nodes:
            raise ValueError(f"duplicate node id {node_id}")
        self.nodes[node_id] = pose

    def add_edge(self, source, target, measurement, information):
        self.edges.append(PoseEdge(source, target, measurement, information))

    @property
    def fixed(self):
        return next(iter(self.nodes))

    def check_connected(self):
        if not self.nodes:
            raise DisconnectedGraphError("graph has no nodes")
        adj = {n: set() for n in self.nodes}
        for e in self.edges:
            if e.source not in adj or e.target not in adj:
                raise ValueError(f"edge refers to a missing node: {e.source} -> {e.target}")
            adj[e.source].add(e.target)
            adj[e.target].add(e.source)
        seen = {self.fixed}
        queue = deque(seen)
        while queue:
            for m in adj[queue.popleft()] - seen:
                seen.add(m)
                queue.append(m)
        if len(seen) != len(self.nodes):
            raise DisconnectedGraphError(f"{len(self.nodes) - len(seen)} node(s) not connected to node {self.fixed}")


def information_from_covariance(cov, floor: float = 1e-8) -> np.ndarray:
    """Inverse covariance with eigenvalues clamped to at least ``floor``."""
    cov = 0.5 * (np.asarray(cov, dtype=float) + np.asarray(cov, dtype=float).T)
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, floor)
    return (vecs / vals) @ vecs.T


def edge_residual(edge: PoseEdge, poses) -> np.ndarray:
    Xi = poses[edge.source]
    Xj = poses[edge.target]
    return log6(compose(invert(edge.measurement), compose(invert(Xi), Xj)))


def chi2(graph: PoseGraph, poses=None) -> float:
    poses = graph.nodes if poses is None else poses
    total = 0.0
    for e in graph.edges:
        r = edge_residual(e, poses)
        total += r @ e.information @ r
    return float(total)


def _edge_jacobians(edge, poses, h=1e-7):
    Xi, Xj = poses[edge.source], poses[edge.target]
    Ji = np.empty((6, 6))
    Jj = np.empty((6, 6))
    Zinv = invert(edge.measurement)
    for k in range(6):
        d = np.zeros(6)
        d[k] = h
        rp = log6(compose(Zinv, compose(invert(compose(Xi, exp6(d))), Xj)))
        rm = log6(compose(Zinv, compose(invert(compose(Xi, exp6(-d))), Xj)))
        Ji[:, k] = (rp - rm) / (2 * h)
        rp = log6(compose(Zinv, compose(invert(Xi), compose(Xj, exp6(d)))))
        rm = log6(compose(Zinv, compose(invert(Xi), compose(Xj, exp6(-d)))))
        Jj[:, k] = (rp - rm) / (2 * h)
    return Ji, Jj


@dataclass(frozen=True)
class OptimizeConfig:
    max_iter: int = 100
    tol: float = 1e-12
    damping: float = 1e-4


@dataclass
class OptimizeResult:
    poses: dict
    chi2: float
    chi2_trace: list
    iterations: int


def optimize(graph: PoseGraph, config: OptimizeConfig = OptimizeConfig()) -> OptimizeResult:
    """Levenberg-Marquardt on the sum of ``r' Omega r``; node ``graph.fixed`` is held."""
    graph.check_connected()
    poses = dict(graph.nodes)
    free = [n for n in poses if n != graph.fixed]
    index = {n: 6 * k for k, n in enumerate(free)}
    dim = 6 * len(free)
    current = chi2(graph, poses)
    trace = [current]
    lam = config.damping
    it = 0
    if dim == 0:
        return OptimizeResult(poses, current, trace, 0)
    for it in range(1, config.max_iter + 1):
        H = np.zeros((dim, dim))
        g = np.zeros(dim)
        for e in graph.edges:
            r = edge_residual(e, poses)
            Ji, Jj = _edge_jacobians(e, poses)
            blocks = [(index.get(e.source), Ji), (index.get(e.target), Jj)]
            for a, Ja in blocks:
                if a is None:
                    continue
                g[a:a + 6] += Ja.T @ e.information @ r
                for b, Jb in blocks:
                    if b is None:
                        continue
                    H[a:a + 6, b:b + 6] += Ja.T @ e.information @ Jb
        if not np.all(np.isfinite(H)) or np.linalg.matrix_rank(H) < dim:
            raise np.linalg.LinAlgError("singular normal equations")
        accepted = False
        while lam < 1e12:
            A = H + lam * np.diag(np.diag(H))
            delta = np.linalg.solve(A, -g)
            trial = dict(poses)
            for n in free:
                a = index[n]
                trial[n] = compose(poses[n], exp6(delta[a:a + 6]))
            new = chi2(graph, trial)
            if new <= current:
                accepted = True
                lam = max(lam / 10.0, 1e-12)
                break
            lam *= 10.0
        if not accepted:
            break
        change = current - new
        poses, current = trial, new
        trace.append(current)
        if change < config.tol or np.max(np.abs(delta)) < 1e-15:
            break
    return OptimizeResult(poses, current, trace, it)


def add_registration(graph: PoseGraph, a: int, b: int, T: RigidTransform, covariance, floor: float = 1e-8):
    """Edge for a registration carrying the object from image ``a`` to image ``b``."""
    graph.add_edge(b, a, T, information_from_covariance(covariance, floor))


def dead_reckoning(transforms) -> list:
    """Node poses from a chain of registrations ``T_k`` (image k -> k+1); node 0 is identity."""
    poses = [RigidTransform.identity()]
    for T in transforms:
        poses.append(compose(poses[-1], invert(T)))
    return poses


def loop_error(edge: PoseEdge, poses) -> tuple[float, float]:
    """Disagreement between the poses and one edge: (degrees, metres)."""
    r = edge_residual(edge, poses)
    return float(np.degrees(np.linalg.norm(r[:3]))), float(np.linalg.norm(r[3:]))
