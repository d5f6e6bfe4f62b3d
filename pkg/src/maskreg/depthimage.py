"""Segmented depth images: surface points plus the free-space mask."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .geometry import from_ray


class PixelState(IntEnum):
    UNKNOWN = 0
    OBJECT = 1
    BACKGROUND = 2


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera with a Gaussian noise model in ray coordinates.

    Pixel ``(col, row)`` has ray direction ``w = (col - cx) / focal``,
    ``h = (row - cy) / focal``. ``noise_cov`` is the 3x3 covariance over
    ``(w, h, r)``.
    """

    width: int = 160
    height: int = 120
    focal: float = 140.0
    cx: float | None = None
    cy: float | None = None
    sigma: float = 0.002
    r_min: float = 0.05
    r_max: float = 10.0
    noise_cov: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.cx is None:
            object.__setattr__(self, "cx", (self.width - 1) / 2.0)
        if self.cy is None:
            object.__setattr__(self, "cy", (self.height - 1) / 2.0)
        L = self.noise_cov
        L = self.sigma**2 * np.eye(3) if L is None else np.array(L, dtype=float)
        if not np.allclose(L, L.T) or np.any(np.linalg.eigvalsh(L) <= 0):
            raise ValueError("noise covariance must be symmetric positive definite")
        if self.r_min <= 0:
            raise ValueError("r_min must be positive")
        L.flags.writeable = False
        object.__setattr__(self, "noise_cov", L)

    @property
    def L(self) -> np.ndarray:
        return self.noise_cov

    def pixel_rays(self):
        """(w, h) grids of shape ``(height, width)`` at pixel centres."""
        cols = (np.arange(self.width) - self.cx) / self.focal
        rows = (np.arange(self.height) - self.cy) / self.focal
        return np.meshgrid(cols, rows)

    def to_pixel(self, w, h):
        return w * self.focal + self.cx, h * self.focal + self.cy


class DepthImage:
    """Per-pixel state and depth (range along the ray, metres).

    ``depth`` is ignored where the state is UNKNOWN.
    """

    def __init__(self, camera: CameraModel, state, depth):
        state = np.ascontiguousarray(state, dtype=np.uint8)
        depth = np.ascontiguousarray(depth, dtype=np.float64)
        shape = (camera.height, camera.width)
        if state.shape != shape or depth.shape != shape:
            raise ValueError(f"grid shape must be {shape}")
        if np.any(state > 2):
            raise ValueError("unknown pixel state code")
        measured = state != PixelState.UNKNOWN
        if np.any(depth[measured] <= 0) or not np.all(np.isfinite(depth[measured])):
            raise ValueError("measured pixels need a positive finite depth")
        depth = np.where(measured, depth, 0.0)
        state.flags.writeable = False
        depth.flags.writeable = False
        self.camera = camera
        self.state = state
        self.depth = depth
        W, H = camera.pixel_rays()
        rows, cols = np.nonzero(state == PixelState.OBJECT)
        pts = np.stack([W[rows, cols], H[rows, cols], depth[rows, cols]], axis=1)
        pts.flags.writeable = False
        self._object_points = pts

    @property
    def shape(self):
        return self.state.shape

    def count(self, state: PixelState) -> int:
        return int(np.count_nonzero(self.state == state))

    def __eq__(self, other):
        if not isinstance(other, DepthImage):
            return NotImplemented
        return (
            self.camera == other.camera
            and np.array_equal(self.camera.L, other.camera.L)
            and np.array_equal(self.state, other.state)
            and np.array_equal(self.depth, other.depth)
        )


def object_cloud(img: DepthImage) -> np.ndarray:
    """Ray coordinates ``(n, 3)`` of the OBJECT pixels, row-major order."""
    return img._object_points


def object_cloud_cartesian(img: DepthImage) -> np.ndarray:
    pts = object_cloud(img)
    return from_ray(pts) if len(pts) else np.zeros((0, 3))


def pixel_at(img: DepthImage, w: float, h: float):
    """Nearest pixel ``(row, col)`` to the ray ``(w, h)``, or ``None`` when out of view."""
    cam = img.camera
    u, v = cam.to_pixel(w, h)
    col = int(np.floor(u + 0.5))
    row = int(np.floor(v + 0.5))
    if 0 <= col < cam.width and 0 <= row < cam.height:
        return row, col
    return None


def subsample_object(img: DepthImage, n_max: int, seed) -> np.ndarray:
    """Uniform subset of the object cloud without replacement, reproducible under ``seed``."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    pts = object_cloud(img)
    if len(pts) <= n_max:
        return pts
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(pts), size=n_max, replace=False))
    return pts[idx]
