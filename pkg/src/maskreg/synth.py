"""Ray-cast synthetic depth images of primitive objects on a table."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .depthimage import CameraModel, DepthImage, PixelState
from .geometry import RigidTransform, compose, rotation_about_axis


@dataclass(frozen=True)
class Box:
    extents: tuple  # full side lengths along local x, y, z
    pose: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        if any(e <= 0 for e in self.extents):
            raise ValueError("box extents must be positive")

    def intersect(self, o, d):
        half = 0.5 * np.asarray(self.extents, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            t1 = (-half - o) * inv
            t2 = (half - o) * inv
        t_near = np.max(np.minimum(t1, t2), axis=-1)
        t_far = np.min(np.maximum(t1, t2), axis=-1)
        hit = (t_near <= t_far) & (t_near > 0)
        return np.where(hit, t_near, np.inf)


@dataclass(frozen=True)
class Cylinder:
    """Capped cylinder along local z, centred at the local origin."""

    radius: float
    length: float
    pose: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        if self.radius <= 0 or self.length <= 0:
            raise ValueError("cylinder dimensions must be positive")

    def intersect(self, o, d):
        hz = 0.5 * self.length
        a = d[..., 0] ** 2 + d[..., 1] ** 2
        b = 2.0 * (o[..., 0] * d[..., 0] + o[..., 1] * d[..., 1])
        c = o[..., 0] ** 2 + o[..., 1] ** 2 - self.radius**2
        disc = b * b - 4 * a * c
        with np.errstate(divide="ignore", invalid="ignore"):
            t_side = (-b - np.sqrt(np.maximum(disc, 0.0))) / (2 * a)
            z_side = o[..., 2] + t_side * d[..., 2]
            side_ok = (disc >= 0) & (a > 0) & (t_side > 0) & (np.abs(z_side) <= hz)
            best = np.where(side_ok, t_side, np.inf)
            for zc in (-hz, hz):
                tc = (zc - o[..., 2]) / d[..., 2]
                px = o[..., 0] + tc * d[..., 0]
                py = o[..., 1] + tc * d[..., 1]
                ok = (tc > 0) & (px * px + py * py <= self.radius**2)
                best = np.where(ok & (tc < best), tc, best)
        return best


@dataclass(frozen=True)
class Sphere:
    radius: float
    pose: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")

    def intersect(self, o, d):
        b = np.sum(o * d, axis=-1)
        c = np.sum(o * o, axis=-1) - self.radius**2
        disc = b * b - c
        t = -b - np.sqrt(np.maximum(disc, 0.0))
        return np.where((disc >= 0) & (t > 0), t, np.inf)


PRIMITIVES = {"box": Box, "cylinder": Cylinder, "sphere": Sphere}


@dataclass(frozen=True)
class Table:
    """Plane ``normal . x = normal . point``; ``half_extent`` bounds a square around ``point``."""

    point: tuple
    normal: tuple
    half_extent: float | None = None

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "normal", tuple(n / np.linalg.norm(n)))
        object.__setattr__(self, "point", tuple(float(c) for c in self.point))

    def frame(self) -> RigidTransform:
        """Table frame: origin at ``point``, z along the normal."""
        n = np.asarray(self.normal)
        ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        x = ref - (ref @ n) * n
        x /= np.linalg.norm(x)
        y = np.cross(n, x)
        return RigidTransform(np.column_stack([x, y, n]), np.asarray(self.point))

    def intersect(self, d):
        n = np.asarray(self.normal)
        p0 = np.asarray(self.point)
        nd = d @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (p0 @ n) / nd
        ok = (nd < 0) & (t > 0)
        if self.half_extent is not None:
            F = self.frame()
            local = (np.where(ok, t, 0.0)[..., None] * d - p0) @ F.rotation
            ok &= (np.abs(local[..., 0]) <= self.half_extent) & (np.abs(local[..., 1]) <= self.half_extent)
        return np.where(ok, t, np.inf)


def default_table(tilt_deg: float = 45.0, height: float = 0.45, half_extent: float | None = 0.5) -> Table:
    """Table seen by a camera ``height`` metres above it, pitched down by ``tilt_deg``."""
    th = np.radians(tilt_deg)
    n = np.array([0.0, -np.cos(th), -np.sin(th)])
    return Table(point=(0.0, 0.0, height / np.sin(th)), normal=tuple(n), half_extent=half_extent)


@dataclass(frozen=True)
class SceneSpec:
    """Primitives in the object frame; ``object_pose`` maps object frame to camera frame."""

    primitives: tuple = ()
    object_pose: RigidTransform = field(default_factory=RigidTransform.identity)
    table: Table | None = None

    def with_pose(self, pose: RigidTransform) -> "SceneSpec":
        return SceneSpec(self.primitives, pose, self.table)


def cast(scene: SceneSpec, directions):
    """Nearest hit distances ``(object_t, table_t)`` along unit camera rays."""
    d = np.asarray(directions, dtype=float)
    obj_t = np.full(d.shape[:-1], np.inf)
    for prim in scene.primitives:
        P = compose(scene.object_pose, prim.pose)
        # rays in primitive-local coordinates; camera origin at 0
        o_loc = -P.translation @ P.rotation
        d_loc = d @ P.rotation
        obj_t = np.minimum(obj_t, prim.intersect(np.broadcast_to(o_loc, d_loc.shape), d_loc))
    table_t = scene.table.intersect(d) if scene.table is not None else np.full(d.shape[:-1], np.inf)
    return obj_t, table_t


def pixel_directions(camera: CameraModel) -> np.ndarray:
    W, H = camera.pixel_rays()
    d = np.stack([W, H, np.ones_like(W)], axis=-1)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def render(scene: SceneSpec, camera: CameraModel = CameraModel(), noise_seed=None, sigma: float | None = None) -> DepthImage:
    """Render a segmented depth image.

    Object hits become OBJECT, table hits BACKGROUND, everything else
    UNKNOWN. Range noise ``N(0, sigma^2)`` is added when ``sigma > 0``
    (``sigma`` defaults to the camera's).
    """
    sigma = camera.sigma if sigma is None else sigma
    d = pixel_directions(camera)
    obj_t, table_t = cast(scene, d)
    state = np.zeros(d.shape[:-1], dtype=np.uint8)
    depth = np.zeros(d.shape[:-1])
    is_obj = np.isfinite(obj_t) & (obj_t <= table_t)
    is_bg = ~is_obj & np.isfinite(table_t)
    state[is_obj] = PixelState.OBJECT
    state[is_bg] = PixelState.BACKGROUND
    depth[is_obj] = obj_t[is_obj]
    depth[is_bg] = table_t[is_bg]
    if sigma > 0:
        rng = np.random.default_rng(noise_seed)
        noise = rng.normal(0.0, sigma, size=depth.shape)
        measured = state != PixelState.UNKNOWN
        depth[measured] += noise[measured]
    measured = state != PixelState.UNKNOWN
    in_range = (depth >= camera.r_min) & (depth <= camera.r_max)
    state[measured & ~in_range] = PixelState.UNKNOWN
    depth[state == PixelState.UNKNOWN] = 0.0
    # stored depth is float32; round here so files and memory agree
    depth = depth.astype(np.float32).astype(np.float64)
    return DepthImage(camera, state, depth)


def make_sequence(scene: SceneSpec, motions, camera: CameraModel = CameraModel(), sigma: float | None = None, seed: int = 0):
    """Render ``len(motions) + 1`` frames; motion k maps the frame-k pose to frame k+1.

    Each frame gets its own noise stream derived from ``seed``.
    """
    poses = [scene.object_pose]
    for M in motions:
        poses.append(compose(M, poses[-1]))
    frames = []
    for k, pose in enumerate(poses):
        img = render(scene.with_pose(pose), camera, noise_seed=np.random.SeedSequence([seed, k]), sigma=sigma)
        frames.append((img, pose))
    return frames


def relative_transforms(poses):
    """Ground-truth motions between consecutive object poses."""
    return [compose(b, a.inverse()) for a, b in zip(poses[:-1], poses[1:])]


def planar_motion(table: Table, center, yaw_deg: float, shift=(0.0, 0.0)) -> RigidTransform:
    """Rotation about the table normal through ``center`` plus an in-plane shift (table x/y)."""
    F = table.frame()
    n = F.rotation[:, 2]
    R = rotation_about_axis(n, np.radians(yaw_deg))
    c = np.asarray(center, dtype=float)
    t = c - R @ c + F.rotation[:, 0] * shift[0] + F.rotation[:, 1] * shift[1]
    return RigidTransform(R, t)


def place_on_table(table: Table, offset=(0.0, 0.0), yaw_deg: float = 0.0) -> RigidTransform:
    """Object frame standing on the table at ``offset`` (table x/y), rotated by ``yaw_deg``."""
    F = table.frame()
    local = RigidTransform(rotation_about_axis([0, 0, 1], np.radians(yaw_deg)), [offset[0], offset[1], 0.0])
    return compose(F, local)


def box_object(extents=(0.14, 0.10, 0.07)):
    return (Box(tuple(extents), RigidTransform(np.eye(3), [0.0, 0.0, extents[2] / 2])),)


def tube_object(radius=0.03, length=0.2):
    # lying on its side along the object x axis
    R = rotation_about_axis([0, 1, 0], np.pi / 2)
    return (Cylinder(radius, length, RigidTransform(R, [0.0, 0.0, radius])),)


def flashlight_object(body_radius=0.02, body_length=0.16, head_radius=0.03, head_length=0.05):
    R = rotation_about_axis([0, 1, 0], np.pi / 2)
    return (
        Cylinder(body_radius, body_length, RigidTransform(R, [-head_length / 2, 0.0, head_radius])),
        Cylinder(head_radius, head_length, RigidTransform(R, [body_length / 2, 0.0, head_radius])),
    )


OBJECTS = {"box": box_object, "tube": tube_object, "flashlight": flashlight_object}


def tabletop_scene(obj: str = "box", table: Table | None = None, yaw_deg: float = 0.0, **kwargs) -> SceneSpec:
    table = default_table() if table is None else table
    prims = OBJECTS[obj](**kwargs)
    return SceneSpec(prims, place_on_table(table, yaw_deg=yaw_deg), table)


def tabletop_motions(scene: SceneSpec, n: int, step_deg: float = 25.0, shift: float = 0.02, seed: int = 0, close_loop: bool = False):
    """``n`` planar motions of about ``step_deg`` with shifts up to ``shift`` metres.

    With ``close_loop`` the yaw steps sum to 360 degrees and the shifts to zero.
    """
    rng = np.random.default_rng(seed)
    if close_loop:
        yaws = np.full(n, 360.0 / n)
        shifts = rng.uniform(-shift, shift, size=(n, 2))
        shifts -= shifts.mean(axis=0)
    else:
        yaws = step_deg + rng.uniform(-2.0, 2.0, size=n)
        shifts = rng.uniform(-shift, shift, size=(n, 2))
    motions = []
    pose = scene.object_pose
    for k in range(n):
        center = pose.translation
        M = planar_motion(scene.table, center, yaws[k], shifts[k])
        motions.append(M)
        pose = compose(M, pose)
    return motions
