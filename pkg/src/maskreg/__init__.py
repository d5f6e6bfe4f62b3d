"""Mask-aware probabilistic registration of segmented depth images."""
from . import _backend
from .depthimage import CameraModel, DepthImage, PixelState
from .geometry import RigidTransform, exp6, log6

BACKEND = _backend.NAME

__all__ = ["BACKEND", "CameraModel", "DepthImage", "PixelState", "RigidTransform", "exp6", "log6"]
