"""Point-to-point ICP baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import RigidTransform


class DegenerateCorrespondenceError(ValueError):
    pass


@dataclass(frozen=True)
class IcpConfig:
    max_iter: int = 100
    tol: float = 1e-10
    max_corr_dist: float = np.inf


@dataclass(frozen=True)
class IcpResult:
    transform: RigidTransform
    rms: float
    iterations: int
    converged: bool
    rms_history: tuple = ()


def kabsch(src, dst, weights=None) -> RigidTransform:
    """Least-squares rigid transform with ``dst ~ R src + t``."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if len(src) < 3:
        raise DegenerateCorrespondenceError("need at least 3 correspondences")
    w = np.ones(len(src)) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()
    cs = w @ src
    cd = w @ dst
    H = (src - cs).T @ ((dst - cd) * w[:, None])
    U, s, Vt = np.linalg.svd(H)
    if s[1] <= 1e-12 * max(s[0], 1e-300):
        raise DegenerateCorrespondenceError("correspondences are collinear")
    d = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return RigidTransform(R, cd - R @ cs)


def icp(P_A, P_B, init: RigidTransform = RigidTransform.identity(), config: IcpConfig = IcpConfig()) -> IcpResult:
    """Align Cartesian cloud ``P_A`` onto ``P_B``; returns the A -> B transform.

    Correspondences farther than ``max_corr_dist`` are dropped from the fit
    and contribute the capped distance to the reported RMS, which keeps the
    RMS non-increasing.
    """
    P_A = np.asarray(P_A, dtype=float)
    P_B = np.asarray(P_B, dtype=float)
    if len(P_A) < 3 or len(P_B) < 3:
        raise DegenerateCorrespondenceError("need at least 3 points in each cloud")
    tree = cKDTree(P_B)
    cap2 = config.max_corr_dist**2
    T = init
    history = []
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        dist, idx = tree.query(T.apply(P_A))
        d2 = dist * dist
        rms = float(np.sqrt(np.mean(np.minimum(d2, cap2))))
        if history and abs(history[-1] - rms) < config.tol:
            history.append(rms)
            converged = True
            break
        history.append(rms)
        inl = d2 <= cap2
        T = kabsch(P_A[inl], P_B[idx[inl]])
    else:
        dist, _ = tree.query(T.apply(P_A))
        history.append(float(np.sqrt(np.mean(np.minimum(dist * dist, cap2)))))
    return IcpResult(T, history[-1], it, converged, tuple(history))
