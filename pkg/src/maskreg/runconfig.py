"""JSON run configuration shared by the command-line tools.

Relative paths inside a config file resolve against the file's directory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import priors, synth
from .depthimage import CameraModel
from .geometry import RigidTransform


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "n_samples": 10_000,
    "n_points": 200,
    "seed": 0,
    "eps_reject": 1e-6,
    "threads": 1,
}

SCENE_DEFAULTS = {
    "object": "box",
    "params": {},
    "frames": 14,
    "step_deg": 25.0,
    "shift": 0.02,
    "close_loop": False,
    "sigma": 0.002,
    "table": True,
    "tilt_deg": 45.0,
    "height": 0.45,
    "camera": {},
}


@dataclass
class RunConfig:
    data: dict = field(default_factory=dict)
    base: Path = Path(".")

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)

    def path(self, key) -> Path | None:
        v = self.data.get(key)
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else self.base / p


def load(path=None, overrides=None) -> RunConfig:
    data = dict(DEFAULTS)
    base = Path(".")
    if path is not None:
        path = Path(path)
        try:
            loaded = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        data.update(loaded)
        base = path.parent
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    for key in ("n_samples", "n_points", "threads"):
        if not isinstance(data[key], int) or data[key] < 1:
            raise ConfigError(f"{key} must be a positive integer")
    if not isinstance(data["seed"], int) or not 0 <= data["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if not data["eps_reject"] >= 0:
        raise ConfigError("eps_reject must be non-negative")
    return RunConfig(data, base)


def build_prior(cfg: RunConfig):
    spec = cfg.get("prior", {"type": "bounded6dof"})
    try:
        return priors.from_dict(spec)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"bad prior spec: {exc}") from exc


def build_camera(spec: dict) -> CameraModel:
    try:
        return CameraModel(**spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad camera spec: {exc}") from exc


def build_scene(cfg: RunConfig):
    """Scene, camera, motions and noise level from the ``scene`` block."""
    spec = dict(SCENE_DEFAULTS)
    spec.update(cfg.get("scene", {}))
    camera = build_camera(spec["camera"])
    table = synth.default_table(spec["tilt_deg"], spec["height"]) if spec["table"] else None
    obj = spec["object"]
    frames = spec["frames"]
    if not isinstance(frames, int) or frames < 1:
        raise ConfigError("scene.frames must be a positive integer")
    if obj in (None, "none"):
        scene = synth.SceneSpec((), table=table)
        return scene, camera, [RigidTransform.identity()] * (frames - 1), spec["sigma"]
    if obj not in synth.OBJECTS:
        raise ConfigError(f"unknown object {obj!r}; choose from {sorted(synth.OBJECTS)}")
    if table is None:
        raise ConfigError("tabletop objects need a table")
    try:
        scene = synth.SceneSpec(synth.OBJECTS[obj](**spec["params"]), synth.place_on_table(table), table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad object parameters: {exc}") from exc
    # a closed loop has one more step, from the last frame back to the first
    n = frames if spec["close_loop"] else frames - 1
    motions = synth.tabletop_motions(
        scene, n, spec["step_deg"], spec["shift"], seed=cfg["seed"], close_loop=spec["close_loop"]
    )
    return scene, camera, motions[: frames - 1], spec["sigma"]
