"""Sampling distributions over the object motion.

Each prior draws transforms that map frame A to frame B. The bounded and
planar priors anchor translation on the cloud centroids: a rotation ``R``
is paired with ``c_B - R c_A`` plus a bounded random offset.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import RigidTransform, exp6, log6, rotvecs_to_matrices

_TOL = 1e-9


def _centroids(P_A, P_B):
    P_A = np.asarray(P_A, dtype=float).reshape(-1, 3)
    P_B = np.asarray(P_B, dtype=float).reshape(-1, 3)
    if len(P_A) == 0 or len(P_B) == 0:
        raise ValueError("centroid-anchored priors need non-empty clouds")
    return P_A.mean(axis=0), P_B.mean(axis=0)


def _uniform_ball(rng, n, radius):
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * (radius * rng.uniform(size=n) ** (1.0 / 3.0))[:, None]


@dataclass(frozen=True)
class Bounded6Dof:
    """Centroid shift at most ``max_shift`` metres, rotation at most ``max_angle_deg``."""

    max_shift: float = 0.04
    max_angle_deg: float = 50.0

    def __post_init__(self):
        if self.max_shift < 0 or self.max_angle_deg < 0:
            raise ValueError("bounds must be non-negative")

    def sample_batch(self, P_A, P_B, rng, n):
        c_A, c_B = _centroids(P_A, P_B)
        axes = rng.normal(size=(n, 3))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        angles = rng.uniform(0.0, np.radians(self.max_angle_deg), size=n)
        Rs = rotvecs_to_matrices(axes * angles[:, None])
        ts = c_B - Rs @ c_A + _uniform_ball(rng, n, self.max_shift)
        return Rs, ts

    def contains(self, T: RigidTransform, P_A, P_B) -> bool:
        c_A, c_B = _centroids(P_A, P_B)
        if np.degrees(T.angle()) > self.max_angle_deg + 1e-7:
            return False
        shift = T.rotation @ c_A + T.translation - c_B
        return bool(np.linalg.norm(shift) <= self.max_shift + _TOL)


@dataclass(frozen=True)
class Planar:
    """Yaw about the table normal and a bounded shift within the table plane."""

    plane_point: tuple = (0.0, 0.0, 0.0)
    plane_normal: tuple = (0.0, 0.0, 1.0)
    max_shift: float = 0.04
    max_yaw_deg: float = 50.0

    def __post_init__(self):
        n = np.asarray(self.plane_normal, dtype=float)
        if not np.isclose(np.linalg.norm(n), 1.0, atol=1e-9):
            raise ValueError("plane normal must be unit length")
        if self.max_shift < 0 or self.max_yaw_deg < 0:
            raise ValueError("bounds must be non-negative")

    @property
    def normal(self) -> np.ndarray:
        return np.asarray(self.plane_normal, dtype=float)

    def _anchor(self, R, c_A, c_B):
        n = self.normal
        t0 = c_B - R @ c_A
        return t0 - (t0 @ n)[..., None] * n

    def sample_batch(self, P_A, P_B, rng, n):
        c_A, c_B = _centroids(P_A, P_B)
        nrm = self.normal
        yaw = rng.uniform(-1.0, 1.0, size=n) * np.radians(self.max_yaw_deg)
        Rs = rotvecs_to_matrices(nrm[None, :] * yaw[:, None])
        # in-plane basis
        ref = np.array([1.0, 0.0, 0.0]) if abs(nrm[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = ref - (ref @ nrm) * nrm
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(nrm, e1)
        rad = self.max_shift * np.sqrt(rng.uniform(size=n))
        phi = rng.uniform(0.0, 2 * np.pi, size=n)
        offs = (rad * np.cos(phi))[:, None] * e1 + (rad * np.sin(phi))[:, None] * e2
        ts = self._anchor(Rs, c_A, c_B) + offs
        return Rs, ts

    def contains(self, T: RigidTransform, P_A, P_B) -> bool:
        c_A, c_B = _centroids(P_A, P_B)
        n = self.normal
        if abs(n @ T.rotation @ n - 1.0) > 1e-9 or abs(n @ T.translation) > 1e-9:
            return False
        if np.degrees(T.angle()) > self.max_yaw_deg + 1e-7:
            return False
        off = T.translation - self._anchor(T.rotation, c_A, c_B)
        return bool(np.linalg.norm(off) <= self.max_shift + _TOL)


@dataclass(frozen=True)
class Gaussian:
    """``exp6(mean_tangent + chol(cov) z)`` with ``z`` standard normal."""

    mean: RigidTransform = field(default_factory=RigidTransform.identity)
    cov: np.ndarray = field(default_factory=lambda: np.eye(6) * 1e-4)

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (6, 6) or not np.allclose(cov, cov.T):
            raise ValueError("covariance must be a symmetric 6x6 matrix")
        np.linalg.cholesky(cov)  # raises if not SPD
        object.__setattr__(self, "cov", cov)

    def sample_batch(self, P_A, P_B, rng, n):
        L = np.linalg.cholesky(self.cov)
        v = log6(self.mean) + rng.normal(size=(n, 6)) @ L.T
        return rotvecs_to_matrices(v[:, :3]), v[:, 3:].copy()

    def contains(self, T, P_A=None, P_B=None) -> bool:
        return True


PriorSpec = Bounded6Dof | Planar | Gaussian


def sample(prior, P_A, P_B, rng) -> RigidTransform:
    Rs, ts = prior.sample_batch(P_A, P_B, rng, 1)
    return RigidTransform(Rs[0], ts[0])


def support_check(prior, T: RigidTransform, P_A=None, P_B=None) -> bool:
    return prior.contains(T, P_A, P_B)


def to_dict(prior) -> dict:
    if isinstance(prior, Bounded6Dof):
        return {"type": "bounded6dof", "max_shift": prior.max_shift, "max_angle_deg": prior.max_angle_deg}
    if isinstance(prior, Planar):
        return {
            "type": "planar",
            "plane_point": list(prior.plane_point),
            "plane_normal": list(prior.plane_normal),
            "max_shift": prior.max_shift,
            "max_yaw_deg": prior.max_yaw_deg,
        }
    if isinstance(prior, Gaussian):
        return {"type": "gaussian", "mean": log6(prior.mean).tolist(), "cov": prior.cov.tolist()}
    raise TypeError(f"unknown prior {prior!r}")


def from_dict(d: dict):
    kind = d.get("type", "").lower()
    if kind == "bounded6dof":
        return Bounded6Dof(float(d.get("max_shift", 0.04)), float(d.get("max_angle_deg", 50.0)))
    if kind == "planar":
        n = np.asarray(d["plane_normal"], dtype=float)
        n = n / np.linalg.norm(n)
        return Planar(
            tuple(d.get("plane_point", (0.0, 0.0, 0.0))),
            tuple(n),
            float(d.get("max_shift", 0.04)),
            float(d.get("max_yaw_deg", 50.0)),
        )
    if kind == "gaussian":
        return Gaussian(exp6(d["mean"]), np.asarray(d["cov"], dtype=float))
    raise ValueError(f"unknown prior type {kind!r}")

