"""Mask-aware point likelihood p(b | M_A, T).

A point ``b`` observed in image B is carried into image A by the inverse of
``T`` (which maps frame A to frame B). Its likelihood is a sum over pixels of
image A near ``[b]_A``: a Gaussian over the image-plane offset times a
smoothed step ``1 + erf(.)`` that vanishes when ``[b]_A`` sits in front of
the depth measured at that pixel.

:func:`point_log_likelihood` and :func:`likelihood_terms` are the readable
per-point reference. Batch evaluation goes through the compiled kernel (or
its numpy fallback) selected in :mod:`maskreg._backend`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import erfc

from . import _backend
from .depthimage import DepthImage, PixelState
from .geometry import DomainError, RigidTransform, from_ray, invert, ray_jacobian, to_ray

REJECT = -np.inf


@dataclass(frozen=True)
class PointLikelihoodConfig:
    """``radius``: Mahalanobis radius of the pixel window under D.
    ``eps_reject``: per-point floor on the pixel sum, in units of K2.
    """

    radius: float = 6.0
    eps_reject: float = 1e-6

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("window radius must be positive")
        if self.eps_reject < 0:
            raise ValueError("eps_reject must be non-negative")


@dataclass(frozen=True)
class LikelihoodTerms:
    anchor: np.ndarray  # [b]_A in ray coordinates of A
    M: np.ndarray
    Lambda: np.ndarray
    D: np.ndarray
    v: np.ndarray
    K2: float

    @property
    def range_sigma(self) -> float:
        """Marginal standard deviation of the range coordinate under Lambda^-1."""
        return float(np.sqrt(np.linalg.inv(self.Lambda)[2, 2]))


def likelihood_terms(b, T: RigidTransform, L) -> LikelihoodTerms:
    """Lambda, D, v and K2 for point ``b`` (ray coords of B) under ``T``."""
    L = np.asarray(L, dtype=float)
    b = np.asarray(b, dtype=float)
    b_cart = from_ray(b)
    a_cart = invert(T).apply(b_cart)
    if a_cart[2] <= 0:
        raise DomainError("[b]_A lies behind camera A")
    Q_A = ray_jacobian(a_cart)
    Q_B = ray_jacobian(b_cart)
    R = T.rotation
    Q_A_inv = np.linalg.inv(Q_A)
    Q_B_inv = np.linalg.inv(Q_B)
    M = Q_B @ R @ Q_A_inv

    Lambda_inv = Q_A @ R.T @ Q_B_inv @ L @ Q_B_inv.T @ R @ Q_A.T + L
    Lambda = np.linalg.inv(Lambda_inv)
    Lambda = 0.5 * (Lambda + Lambda.T)
    K2 = 1.0 / np.sqrt(np.linalg.det(L + M @ L @ M.T))

    l11, l22, l33 = Lambda[0, 0], Lambda[1, 1], Lambda[2, 2]
    l21, l31, l32 = Lambda[1, 0], Lambda[2, 0], Lambda[2, 1]
    off = l33 * l21 - l31 * l32
    D = np.array([[l11 * l33 - l31**2, off], [off, l22 * l33 - l32**2]]) / l33
    v = np.array([l31, l32, l33]) / np.sqrt(2.0 * l33)
    return LikelihoodTerms(to_ray(a_cart), M, Lambda, D, v, float(K2))


def _window(img: DepthImage, terms: LikelihoodTerms, radius: float):
    """Pixel slots ``(row, col, dwh, state, depth)`` within the Mahalanobis window.

    Slots outside the image are reported with state UNKNOWN.
    """
    cam = img.camera
    Dinv = np.linalg.inv(terms.D)
    u, v = cam.to_pixel(terms.anchor[0], terms.anchor[1])
    if not np.isfinite(radius):
        rows = range(cam.height)
        cols = range(cam.width)
    else:
        ext_u = radius * np.sqrt(Dinv[0, 0]) * cam.focal
        ext_v = radius * np.sqrt(Dinv[1, 1]) * cam.focal
        cols = range(int(np.ceil(u - ext_u)), int(np.floor(u + ext_u)) + 1)
        rows = range(int(np.ceil(v - ext_v)), int(np.floor(v + ext_v)) + 1)
    for row in rows:
        for col in cols:
            dwh = terms.anchor[:2] - np.array([(col - cam.cx) / cam.focal, (row - cam.cy) / cam.focal])
            if dwh @ terms.D @ dwh > radius * radius:
                continue
            if 0 <= row < cam.height and 0 <= col < cam.width:
                yield row, col, dwh, PixelState(img.state[row, col]), img.depth[row, col]
            else:
                yield row, col, dwh, PixelState.UNKNOWN, 0.0


def point_log_likelihood(b, img_A: DepthImage, T: RigidTransform, config=PointLikelihoodConfig()) -> float:
    """log of ``K2 * sum_i exp(-d_wh' D d_wh / 2) (1 + erf(v' d))``, or REJECT."""
    try:
        terms = likelihood_terms(b, T, img_A.camera.L)
    except DomainError:
        return REJECT
    total = 0.0
    for _, _, dwh, state, depth in _window(img_A, terms, config.radius):
        g = np.exp(-0.5 * dwh @ terms.D @ dwh)
        if state == PixelState.UNKNOWN:
            total += 2.0 * g
        else:
            d = np.array([dwh[0], dwh[1], terms.anchor[2] - depth])
            total += g * erfc(-(terms.v @ d))
    if total <= config.eps_reject:
        return REJECT
    return float(np.log(terms.K2) + np.log(total))


def closed_form_scale(terms: LikelihoodTerms) -> float:
    """Factor between the closed form and the exact depth integral.

    The closed form keeps only K2; integrating the Gaussian K1 exp(-e'Le/2)
    over a half-line in range contributes ``(2 pi)^-3/2 sqrt(pi / (2 L33))``.
    """
    return (2 * np.pi) ** -1.5 * np.sqrt(np.pi / (2.0 * terms.Lambda[2, 2]))


def numeric_point_likelihood(b, img_A: DepthImage, T: RigidTransform, radius: float = 6.0) -> float:
    """Adaptive-quadrature evaluation of ``sum_i int_{r_i}^inf p(b | w_i, h_i, r) dr``.

    ``p(b | a, T) = K1 exp(-(a - [b]_A)' Lambda (a - [b]_A) / 2)`` is
    integrated numerically along range for every pixel in the window; the
    result is the exact density, i.e. the closed form times
    :func:`closed_form_scale`. Test oracle only.
    """
    cam = img_A.camera
    L = cam.L
    terms = likelihood_terms(b, T, L)
    Lam = terms.Lambda
    K1 = (2 * np.pi) ** -1.5 / np.sqrt(np.linalg.det(L + terms.M @ L @ terms.M.T))
    anchor = terms.anchor
    cov = np.linalg.inv(Lam)
    sig_r = np.sqrt(cov[2, 2])
    wh_scale = np.sqrt(np.max(np.linalg.eigvalsh(cov[:2, :2])))

    def quadratic(r, w_i, h_i):
        e = anchor - np.array([w_i, h_i, r])
        return e @ Lam @ e

    total = 0.0
    for row, col, dwh, state, depth in _window(img_A, terms, radius):
        if np.hypot(*dwh) > 40.0 * wh_scale:
            continue  # exp(-800): below double precision relative to any in-view term
        w_i, h_i = anchor[0] - dwh[0], anchor[1] - dwh[1]
        # peak of the integrand along r
        r_peak = anchor[2] + (Lam[2, 0] * dwh[0] + Lam[2, 1] * dwh[1]) / Lam[2, 2]
        lo = cam.r_min if state == PixelState.UNKNOWN else depth
        hi = max(lo, r_peak) + 10.0 * sig_r
        pts = [r_peak] if lo < r_peak < hi else None
        # integrate exp(-(q - q0)/2), with q0 the minimum on [lo, inf), so deep tails keep full precision
        q0 = quadratic(max(lo, r_peak), w_i, h_i)

        def f(r):
            return np.exp(-0.5 * (quadratic(r, w_i, h_i) - q0))

        body, _ = integrate.quad(f, lo, hi, points=pts, epsabs=0.0, epsrel=1e-10, limit=200)
        tail, _ = integrate.quad(f, hi, np.inf, epsabs=1e-15 * sig_r, epsrel=1e-10)  # f < e^-50 here
        if not np.isfinite(body + tail):
            raise ArithmeticError("quadrature did not converge")
        total += K1 * np.exp(-0.5 * q0) * (body + tail)
    return total


def cloud_log_likelihood(points_B, img_A: DepthImage, T: RigidTransform, config=PointLikelihoodConfig()) -> float:
    """Sum of per-point log-likelihoods; REJECT if any point rejects."""
    points_B = np.asarray(points_B, dtype=float)
    if len(points_B) == 0:
        raise ValueError("point cloud must be non-empty")
    out = batch_log_likelihood(points_B, img_A, [T], config)
    return float(out[0])


def batch_log_likelihood(points_B, img_A: DepthImage, transforms, config=PointLikelihoodConfig()) -> np.ndarray:
    """Cloud log-likelihood for many transforms at once (REJECT -> -inf)."""
    prepared = prepare_cloud(points_B)
    Rs = np.ascontiguousarray([T.rotation for T in transforms], dtype=float).reshape(-1, 3, 3)
    ts = np.ascontiguousarray([T.translation for T in transforms], dtype=float).reshape(-1, 3)
    return evaluate_prepared(prepared, img_A, Rs, ts, config)


def point_log_likelihoods(points_B, img_A: DepthImage, T: RigidTransform, config=PointLikelihoodConfig()) -> np.ndarray:
    """Per-point log-likelihoods via the batch backend (no early exit)."""
    pts, QB = prepare_cloud(points_B)
    out = np.empty(len(pts))
    cam = img_A.camera
    _backend.point_logliks(
        pts, QB, img_A.state, img_A.depth, cam.focal, cam.cx, cam.cy,
        np.ascontiguousarray(cam.L), np.ascontiguousarray(T.rotation), np.ascontiguousarray(T.translation),
        config.radius, config.eps_reject, out,
    )
    return out


def prepare_cloud(points_B):
    """Cartesian coordinates and ray Jacobians of a cloud; independent of T."""
    pts_ray = np.asarray(points_B, dtype=float).reshape(-1, 3)
    cart = np.ascontiguousarray(from_ray(pts_ray))
    QB = np.ascontiguousarray([ray_jacobian(p) for p in cart]).reshape(-1, 3, 3)
    return cart, QB


def evaluate_prepared(prepared, img_A: DepthImage, Rs, ts, config) -> np.ndarray:
    pts, QB = prepared
    cam = img_A.camera
    out = np.empty(len(Rs))
    _backend.cloud_logliks(
        pts, QB, img_A.state, img_A.depth, cam.focal, cam.cx, cam.cy, np.ascontiguousarray(cam.L),
        np.ascontiguousarray(Rs), np.ascontiguousarray(ts), config.radius, config.eps_reject, out,
    )
    return out
