"""Importance-sampling registration of two depth images.

Transforms are drawn from the prior and weighted by the product of the two
mask likelihoods: points of B inside the mask of A, and points of A inside
the mask of B. No resampling is done; the weighted set is the posterior.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .depthimage import DepthImage, object_cloud_cartesian, subsample_object
from .geometry import RigidTransform, matrices_to_rotvecs, project_to_so3
from .sensor import PointLikelihoodConfig, evaluate_prepared, prepare_cloud

log = logging.getLogger(__name__)


class NoPosteriorError(RuntimeError):
    """Every sampled transform was rejected."""

    def __init__(self, rejected_count: int):
        super().__init__(f"all {rejected_count} sampled transforms were rejected")
        self.rejected_count = rejected_count


@dataclass(frozen=True)
class RegistrationConfig:
    n_samples: int = 10_000
    n_points: int = 200
    seed: int = 0
    eps_reject: float = 1e-6
    radius: float = 6.0
    threads: int = 1
    block_size: int = 2048

    def likelihood_config(self) -> PointLikelihoodConfig:
        return PointLikelihoodConfig(self.radius, self.eps_reject)


@dataclass(frozen=True)
class WeightedSample:
    transform: RigidTransform
    log_weight: float


@dataclass
class TransformPosterior:
    """Surviving samples (arrays) with normalized weights and derived moments."""

    rotations: np.ndarray
    translations: np.ndarray
    log_weights: np.ndarray
    weights: np.ndarray
    mean: RigidTransform
    covariance: np.ndarray
    effective_sample_size: float
    rejected_count: int
    evaluated_count: int

    @property
    def samples(self) -> list[WeightedSample]:
        return [
            WeightedSample(RigidTransform(R, t), float(lw))
            for R, t, lw in zip(self.rotations, self.translations, self.log_weights)
        ]


def normalize_log_weights(log_weights) -> np.ndarray:
    lw = np.asarray(log_weights, dtype=float)
    return np.exp(lw - logsumexp(lw))


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


def posterior_mean(rotations, translations, weights) -> RigidTransform:
    """Weighted chordal mean rotation and weighted mean translation."""
    w = np.asarray(weights, dtype=float)
    Rs = np.asarray(rotations, dtype=float).reshape(-1, 3, 3)
    if len(w) == 0:
        raise ValueError("need at least one sample")
    S = np.einsum("n,nij->ij", w, Rs)
    s = np.linalg.svd(S, compute_uv=False)
    if s[1] <= 1e-12 * max(s[0], 1e-300):
        raise np.linalg.LinAlgError("weighted rotation sum is rank deficient; mean rotation undefined")
    t = w @ np.asarray(translations, dtype=float).reshape(-1, 3)
    return RigidTransform(project_to_so3(S), t)


def tangent_residuals(mean: RigidTransform, rotations, translations) -> np.ndarray:
    """``log6(mean^-1 o T)`` for each sample, ``(n, 6)``."""
    Rm = mean.rotation
    dR = np.einsum("ji,njk->nik", Rm, np.asarray(rotations).reshape(-1, 3, 3))
    dt = (np.asarray(translations).reshape(-1, 3) - mean.translation) @ Rm
    return np.concatenate([matrices_to_rotvecs(dR), dt], axis=1)


def posterior_covariance(rotations, translations, weights, mean: RigidTransform) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    d = tangent_residuals(mean, rotations, translations)
    C = np.einsum("n,ni,nj->ij", w, d, d)
    return 0.5 * (C + C.T)


def _evaluate_block(args):
    prior, A_cart, B_cart, fwd, bwd, img_A, img_B, cfg, seq, size = args
    rng = np.random.default_rng(seq)
    Rs, ts = prior.sample_batch(A_cart, B_cart, rng, size)
    Rs = np.ascontiguousarray(Rs)
    ts = np.ascontiguousarray(ts)
    lcfg = cfg.likelihood_config()
    lw = evaluate_prepared(fwd, img_A, Rs, ts, lcfg)
    alive = np.nonzero(np.isfinite(lw))[0]
    if len(alive):
        Rinv = np.ascontiguousarray(Rs[alive].transpose(0, 2, 1))
        tinv = np.ascontiguousarray(-np.einsum("nij,nj->ni", Rinv, ts[alive]))
        lw[alive] += evaluate_prepared(bwd, img_B, Rinv, tinv, lcfg)
    return Rs, ts, lw


def register(img_A: DepthImage, img_B: DepthImage, prior, config: RegistrationConfig = RegistrationConfig()) -> TransformPosterior:
    """Posterior over the transform mapping the object in A onto the object in B."""
    if config.n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    A_cart = object_cloud_cartesian(img_A)
    B_cart = object_cloud_cartesian(img_B)
    if len(A_cart) == 0 or len(B_cart) == 0:
        raise ValueError("both images need at least one OBJECT pixel")

    ss_A, ss_B, ss_order, ss_samples = np.random.SeedSequence(config.seed).spawn(4)
    P_A = subsample_object(img_A, config.n_points, ss_A)
    P_B = subsample_object(img_B, config.n_points, ss_B)
    # random point order makes early rejection cheap
    order_rng = np.random.default_rng(ss_order)
    P_A = P_A[order_rng.permutation(len(P_A))]
    P_B = P_B[order_rng.permutation(len(P_B))]
    fwd = prepare_cloud(P_B)  # points of B against the mask of A
    bwd = prepare_cloud(P_A)

    n_blocks = -(-config.n_samples // config.block_size)
    sizes = [config.block_size] * (n_blocks - 1) + [config.n_samples - config.block_size * (n_blocks - 1)]
    jobs = [
        (prior, A_cart, B_cart, fwd, bwd, img_A, img_B, config, seq, size)
        for seq, size in zip(ss_samples.spawn(n_blocks), sizes)
    ]
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as ex:
            results = list(ex.map(_evaluate_block, jobs))
    else:
        results = [_evaluate_block(j) for j in jobs]

    Rs = np.concatenate([r[0] for r in results])
    ts = np.concatenate([r[1] for r in results])
    lw = np.concatenate([r[2] for r in results])
    keep = np.isfinite(lw)
    rejected = int(np.count_nonzero(~keep))
    if not np.any(keep):
        raise NoPosteriorError(rejected)
    Rs, ts, lw = Rs[keep], ts[keep], lw[keep]
    w = normalize_log_weights(lw)
    mean = posterior_mean(Rs, ts, w)
    cov = posterior_covariance(Rs, ts, w, mean)
    ess = effective_sample_size(w)
    log.debug("evaluated %d samples, %d rejected, ESS %.2f", config.n_samples, rejected, ess)
    return TransformPosterior(Rs, ts, lw, w, mean, cov, ess, rejected, config.n_samples)
