import numpy as np
import pytest

from maskreg import priors
from maskreg.geometry import RigidTransform, exp6, rotation_about_axis, rotation_angle
from maskreg.priors import Bounded6Dof, Gaussian, Planar

P_A = np.array([[0.0, 0.0, 1.0], [0.1, 0.0, 1.1], [0.0, 0.1, 0.9], [0.05, 0.05, 1.0]])
P_B = P_A + [0.02, -0.01, 0.03]
NORMAL = np.array([0.0, -1.0, -1.0]) / np.sqrt(2.0)
TABLE = (0.0, 0.0, 0.64)


def test_zero_bounds_give_centroid_alignment(rng):
    Rs, ts = Bounded6Dof(0.0, 0.0).sample_batch(P_A, P_B, rng, 10)
    assert np.allclose(Rs, np.eye(3))
    assert np.allclose(ts, P_B.mean(0) - P_A.mean(0))


def test_bounded_respects_bounds(rng):
    prior = Bounded6Dof(0.04, 50.0)
    Rs, ts = prior.sample_batch(P_A, P_B, rng, 100_000)
    angles = np.degrees([rotation_angle(R) for R in Rs[:5000]])
    tr = np.trace(Rs, axis1=1, axis2=2)
    all_angles = np.degrees(np.arccos(np.clip((tr - 1) / 2, -1, 1)))
    shift = np.einsum("nij,j->ni", Rs, P_A.mean(0)) + ts - P_B.mean(0)
    assert all_angles.max() <= 50.0 + 1e-6 and np.allclose(angles, all_angles[:5000], atol=1e-5)
    assert np.linalg.norm(shift, axis=1).max() <= 0.04 + 1e-12
    # the bound is actually reached: uniform angle, ball volume
    assert all_angles.max() > 49.5 and np.linalg.norm(shift, axis=1).max() > 0.039
    axes = np.stack([Rs[:, 2, 1] - Rs[:, 1, 2], Rs[:, 0, 2] - Rs[:, 2, 0], Rs[:, 1, 0] - Rs[:, 0, 1]], 1)
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    assert np.all(np.abs(axes.mean(0)) < 0.02)  # isotropic axes


def test_planar_samples_preserve_the_plane(rng):
    prior = Planar(TABLE, tuple(NORMAL), 0.04, 50.0)
    A = P_A - ((P_A - TABLE) @ NORMAL)[:, None] * NORMAL  # clouds on the plane
    B = A + np.cross(NORMAL, [1.0, 0, 0]) * 0.01
    Rs, ts = prior.sample_batch(A, B, rng, 20_000)
    assert np.allclose(np.einsum("i,nij,j->n", NORMAL, Rs, NORMAL), 1.0, atol=1e-10)
    assert np.allclose(ts @ NORMAL, 0.0, atol=1e-10)
    test_pts = np.array(TABLE) + np.array([[0.1, 0.2, -0.2], [-0.3, 0.0, 0.0]]) @ (np.eye(3) - np.outer(NORMAL, NORMAL))
    moved = np.einsum("nij,kj->nki", Rs, test_pts) + ts[:, None, :]
    assert np.abs((moved - TABLE) @ NORMAL).max() <= 1e-9
    yaw = np.degrees([rotation_angle(R) for R in Rs[:2000]])
    assert yaw.max() <= 50.0 + 1e-9 and yaw.max() > 49.0


@pytest.mark.parametrize(
    "prior",
    [Bounded6Dof(0.04, 50.0), Planar(TABLE, tuple(NORMAL), 0.03, 40.0), Gaussian(exp6([0.1, 0, 0, 0, 0.01, 0]), np.eye(6) * 1e-4)],
)
def test_every_sample_is_in_support_and_stream_is_deterministic(prior):
    rng = np.random.default_rng(5)
    Rs, ts = prior.sample_batch(P_A, P_B, rng, 500)
    assert all(priors.support_check(prior, RigidTransform(R, t), P_A, P_B) for R, t in zip(Rs, ts))
    Rs2, ts2 = prior.sample_batch(P_A, P_B, np.random.default_rng(5), 500)
    assert np.array_equal(Rs, Rs2) and np.array_equal(ts, ts2)
    T1 = priors.sample(prior, P_A, P_B, np.random.default_rng(9))
    T2 = priors.sample(prior, P_A, P_B, np.random.default_rng(9))
    assert np.array_equal(T1.matrix(), T2.matrix())


def test_support_check_examples():
    prior = Bounded6Dof(0.04, 50.0)
    assert priors.support_check(prior, RigidTransform.identity(), P_A, P_A)
    quarter = RigidTransform(rotation_about_axis([0, 0, 1], np.pi / 2), np.zeros(3))
    assert not priors.support_check(prior, quarter, P_A, P_A)
    c = P_A.mean(0)
    R = rotation_about_axis([0, 1, 0], np.radians(50.0))
    assert priors.support_check(prior, RigidTransform(R, c - R @ c), P_A, P_A)  # closed at the bound
    assert not priors.support_check(prior, RigidTransform(np.eye(3), [0.05, 0, 0]), P_A, P_A)


def test_gaussian_prior_moments():
    cov = np.diag([1e-3, 2e-3, 5e-4, 1e-4, 4e-4, 9e-4])
    mean = exp6([0.2, -0.1, 0.05, 0.1, 0.0, 0.3])
    Rs, ts = Gaussian(mean, cov).sample_batch(None, None, np.random.default_rng(0), 40_000)
    assert np.allclose(ts.mean(0), mean.translation, atol=1e-3)
    assert np.allclose(np.cov(ts.T), cov[3:, 3:], rtol=0.05, atol=1e-5)


@pytest.mark.parametrize("kw", [dict(max_shift=-1.0), dict(max_angle_deg=-5.0)])
def test_bounded_validation(kw):
    with pytest.raises(ValueError):
        Bounded6Dof(**kw)


def test_planar_and_gaussian_validation():
    with pytest.raises(ValueError):
        Planar(plane_normal=(0.0, 0.0, 2.0))
    with pytest.raises(np.linalg.LinAlgError):
        Gaussian(RigidTransform.identity(), -np.eye(6))
    with pytest.raises(ValueError):
        Bounded6Dof().sample_batch(np.zeros((0, 3)), P_B, np.random.default_rng(), 1)


@pytest.mark.parametrize(
    "prior",
    [Bounded6Dof(0.01, 10.0), Planar(TABLE, tuple(NORMAL), 0.02, 30.0), Gaussian(exp6([0.1, 0, 0, 0, 0.01, 0]), np.eye(6) * 1e-4)],
)
def test_dict_round_trip(prior):
    back = priors.from_dict(priors.to_dict(prior))
    a = prior.sample_batch(P_A, P_B, np.random.default_rng(1), 20)
    b = back.sample_batch(P_A, P_B, np.random.default_rng(1), 20)
    assert np.allclose(a[0], b[0], atol=1e-12) and np.allclose(a[1], b[1], atol=1e-12)


def test_unknown_prior_type():
    with pytest.raises(ValueError):
        priors.from_dict({"type": "uniform"})
