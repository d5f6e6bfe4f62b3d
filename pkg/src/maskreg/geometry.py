"""Ray coordinates, their Jacobians and rigid-body transforms.

Ray coordinates of a camera-frame point (x, y, z) are ``(x/z, y/z, |p|)``:
the projection onto an image plane at unit focal length, plus range.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SMALL_ANGLE = 1e-8


class DomainError(ValueError):
    """Input outside the domain of a geometric map."""


def to_ray(p):
    """Cartesian ``(..., 3)`` -> ray coordinates ``(..., 3)``."""
    p = np.asarray(p, dtype=float)
    z = p[..., 2]
    if np.any(z <= 0):
        raise DomainError("point must lie in front of the camera (z > 0)")
    out = np.empty_like(p)
    out[..., 0] = p[..., 0] / z
    out[..., 1] = p[..., 1] / z
    out[..., 2] = np.linalg.norm(p, axis=-1)
    return out


def from_ray(q):
    """Ray coordinates ``(..., 3)`` -> Cartesian ``(..., 3)``."""
    q = np.asarray(q, dtype=float)
    if np.any(q[..., 2] <= 0):
        raise DomainError("range must be positive")
    w, h, r = q[..., 0], q[..., 1], q[..., 2]
    z = r / np.sqrt(1.0 + w * w + h * h)
    return np.stack([w * z, h * z, z], axis=-1)


def ray_jacobian(p) -> np.ndarray:
    """d(w, h, r)/d(x, y, z) at the Cartesian point ``p``."""
    x, y, z = (float(c) for c in p)
    if z <= 0:
        raise DomainError("point must lie in front of the camera (z > 0)")
    r = np.sqrt(x * x + y * y + z * z)
    return np.array(
        [
            [1.0 / z, 0.0, -x / (z * z)],
            [0.0, 1.0 / z, -y / (z * z)],
            [x / r, y / r, z / r],
        ]
    )


def ray_jacobian_inverse(q) -> np.ndarray:
    """d(x, y, z)/d(w, h, r) at the ray point ``q``; inverse of :func:`ray_jacobian`."""
    w, h, r = (float(c) for c in q)
    rho = np.sqrt(1.0 + w * w + h * h)
    z = r / rho
    dz_dw = -r * w / rho**3
    dz_dh = -r * h / rho**3
    return np.array(
        [
            [z + w * dz_dw, w * dz_dh, w / rho],
            [h * dz_dw, z + h * dz_dh, h / rho],
            [dz_dw, dz_dh, 1.0 / rho],
        ]
    )


def skew(v) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def rotvec_to_matrix(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v)
    K = skew(v)
    if theta < _SMALL_ANGLE:
        return np.eye(3) + K + 0.5 * K @ K
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * K @ K


def rotation_angle(R) -> float:
    """Geodesic angle of a rotation matrix in radians, in [0, pi]."""
    c = 0.5 * (np.trace(R) - 1.0)
    s = 0.5 * np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return float(np.arctan2(s, c))


def matrix_to_rotvec(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    theta = rotation_angle(R)
    if theta >= np.pi - 1e-9:
        raise DomainError("rotation angle must be < pi for the log map")
    axis_sin = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < _SMALL_ANGLE:
        return axis_sin
    if theta < 0.5 * np.pi:
        return axis_sin * (theta / np.sin(theta))
    # near pi the antisymmetric part loses precision; use the symmetric part
    B = 0.5 * (R + R.T) - np.cos(theta) * np.eye(3)
    k = int(np.argmax(np.diag(B)))
    axis = B[:, k] / np.sqrt(B[k, k] * (1.0 - np.cos(theta)))
    if axis @ axis_sin < 0:
        axis = -axis
    return axis / np.linalg.norm(axis) * theta


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """x -> R x + t. Tangent vector is ``(rotvec, t)``, rotation first."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, H) -> "RigidTransform":
        H = np.asarray(H, dtype=float)
        return cls(H[:3, :3], H[:3, 3])

    def matrix(self) -> np.ndarray:
        H = np.eye(4)
        H[:3, :3] = self.rotation
        H[:3, 3] = self.translation
        return H

    def apply(self, points) -> np.ndarray:
        """Transform Cartesian points of shape ``(3,)`` or ``(n, 3)``."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)

    def inverse(self) -> "RigidTransform":
        return invert(self)

    def angle(self) -> float:
        return rotation_angle(self.rotation)

    def __repr__(self):
        v = np.array2string(log6(self), precision=6) if self.angle() < np.pi - 1e-9 else "?"
        return f"RigidTransform(tangent={v})"


def compose(T1: RigidTransform, T2: RigidTransform) -> RigidTransform:
    """``T1 o T2``: apply ``T2`` first."""
    return RigidTransform(T1.rotation @ T2.rotation, T1.rotation @ T2.translation + T1.translation)


def invert(T: RigidTransform) -> RigidTransform:
    Rt = T.rotation.T
    return RigidTransform(Rt, -Rt @ T.translation)


def exp6(v) -> RigidTransform:
    v = np.asarray(v, dtype=float)
    return RigidTransform(rotvec_to_matrix(v[:3]), v[3:6])


def log6(T: RigidTransform) -> np.ndarray:
    return np.concatenate([matrix_to_rotvec(T.rotation), T.translation])


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    return rotvec_to_matrix(axis / np.linalg.norm(axis) * angle)


def project_to_so3(M) -> np.ndarray:
    """Closest rotation to ``M`` in Frobenius norm (orthogonal polar factor)."""
    U, s, Vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(U @ Vt))
    if d == 0:
        d = 1.0
    return U @ np.diag([1.0, 1.0, d]) @ Vt


def transform_distance(T1: RigidTransform, T2: RigidTransform) -> tuple[float, float]:
    """(geodesic rotation angle in degrees, translation distance in metres)."""
    dR = T1.rotation.T @ T2.rotation
    return np.degrees(rotation_angle(dR)), float(np.linalg.norm(T1.translation - T2.translation))


def linearized_cross_transform(b_ray, T: RigidTransform):
    """Linearize the ray-coordinate map from image A into image B around ``b``.

    ``b_ray`` is a point in ray coordinates of image B and ``T`` maps frame A
    to frame B. Returns ``(anchor, M)`` with ``anchor = [b]_A`` in ray
    coordinates of A and ``M = Q_B R Q_A^{-1}``, so that for ``s`` near the
    anchor ``[s]_B ~ b + M (s - anchor)``.
    """
    b_ray = np.asarray(b_ray, dtype=float)
    b_cart = from_ray(b_ray)
    a_cart = invert(T).apply(b_cart)
    if a_cart[2] <= 0:
        raise DomainError("[b]_A lies behind camera A")
    Q_A = ray_jacobian(a_cart)
    Q_B = ray_jacobian(b_cart)
    if abs(np.linalg.det(Q_A)) < 1e-300:
        raise np.linalg.LinAlgError("singular ray Jacobian")
    M = Q_B @ T.rotation @ np.linalg.inv(Q_A)
    return to_ray(a_cart), M


def cross_transform(s_ray_A, T: RigidTransform) -> np.ndarray:
    """Exact map of ray coordinates in A to ray coordinates in B."""
    return to_ray(T.apply(from_ray(s_ray_A)))


def rotvecs_to_matrices(V) -> np.ndarray:
    """Vectorized Rodrigues formula, ``(n, 3) -> (n, 3, 3)``."""
    V = np.asarray(V, dtype=float).reshape(-1, 3)
    theta = np.linalg.norm(V, axis=1)
    K = np.zeros((len(V), 3, 3))
    K[:, 0, 1], K[:, 0, 2] = -V[:, 2], V[:, 1]
    K[:, 1, 0], K[:, 1, 2] = V[:, 2], -V[:, 0]
    K[:, 2, 0], K[:, 2, 1] = -V[:, 1], V[:, 0]
    small = theta < _SMALL_ANGLE
    th = np.where(small, 1.0, theta)
    a = np.where(small, 1.0, np.sin(th) / th)
    b = np.where(small, 0.5, (1.0 - np.cos(th)) / (th * th))
    return np.eye(3) + a[:, None, None] * K + b[:, None, None] * (K @ K)


def matrices_to_rotvecs(Rs) -> np.ndarray:
    """Vectorized inverse of :func:`rotvecs_to_matrices` for angles < pi."""
    Rs = np.asarray(Rs, dtype=float).reshape(-1, 3, 3)
    axis_sin = 0.5 * np.stack(
        [Rs[:, 2, 1] - Rs[:, 1, 2], Rs[:, 0, 2] - Rs[:, 2, 0], Rs[:, 1, 0] - Rs[:, 0, 1]], axis=1
    )
    s = np.linalg.norm(axis_sin, axis=1)
    c = 0.5 * (np.trace(Rs, axis1=1, axis2=2) - 1.0)
    theta = np.arctan2(s, c)
    out = axis_sin * np.where(theta < _SMALL_ANGLE, 1.0, theta / np.where(s > 0, s, 1.0))[:, None]
    for i in np.nonzero(theta >= 0.5 * np.pi)[0]:
        out[i] = matrix_to_rotvec(Rs[i])
    return out
