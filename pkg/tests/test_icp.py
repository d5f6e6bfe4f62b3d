import numpy as np
import pytest

from maskreg import synth
from maskreg.depthimage import object_cloud_cartesian
from maskreg.geometry import RigidTransform, exp6, transform_distance
from maskreg.icp import DegenerateCorrespondenceError, IcpConfig, icp, kabsch


@pytest.fixture(scope="module")
def cloud():
    img = synth.render(synth.tabletop_scene("box"), sigma=0.0)
    return object_cloud_cartesian(img)


def test_kabsch_exact(rng):
    src = rng.normal(size=(50, 3))
    T = exp6([0.3, -0.8, 1.1, 0.5, -0.2, 0.1])
    got = kabsch(src, T.apply(src))
    assert np.allclose(got.matrix(), T.matrix(), atol=1e-10)


def test_kabsch_reflection_guard(rng):
    src = rng.normal(size=(20, 3))
    got = kabsch(src, src * [1, 1, -1])
    assert np.isclose(np.linalg.det(got.rotation), 1.0)


def test_kabsch_degenerate():
    with pytest.raises(DegenerateCorrespondenceError):
        kabsch(np.zeros((2, 3)), np.zeros((2, 3)))
    line = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateCorrespondenceError):
        kabsch(line, line)


def test_identical_clouds(cloud):
    res = icp(cloud, cloud)
    assert res.rms < 1e-12 and res.converged
    assert np.allclose(res.transform.matrix(), np.eye(4))


def test_recovers_small_motion(cloud):
    c = cloud.mean(0)
    R = exp6([0.002, -0.003, 0.004, 0, 0, 0]).rotation
    T = RigidTransform(R, c - R @ c + [0.0004, -0.0003, 0.0002])  # below the point spacing
    res = icp(cloud, T.apply(cloud), config=IcpConfig(max_iter=200, tol=1e-14))
    deg, m = transform_distance(res.transform, T)
    assert np.radians(deg) < 1e-6 and m < 1e-6
    assert res.rms < 1e-6


def test_rms_never_increases(cloud, rng):
    T = exp6([0.0, 0.1, 0.1, 0.01, 0.0, 0.01])
    noisy = T.apply(cloud) + rng.normal(scale=0.002, size=cloud.shape)
    for cap in (np.inf, 0.01):
        res = icp(cloud, noisy, config=IcpConfig(max_corr_dist=cap))
        assert np.all(np.diff(res.rms_history) <= 1e-12)


def test_square_box_adversarial_init_finds_wrong_mode():
    table = synth.default_table()
    scene = synth.tabletop_scene("box", table, extents=(0.22, 0.20, 0.08))
    centre = scene.object_pose.translation
    truth = synth.planar_motion(table, centre, 15.0, (0.01, 0.0))
    A = object_cloud_cartesian(synth.render(scene, noise_seed=0))
    B = object_cloud_cartesian(synth.render(scene.with_pose(truth @ scene.object_pose), noise_seed=1))
    init = synth.planar_motion(table, centre, 15.0 + 90.0, (0.01, 0.0))
    res = icp(A, B, init)
    assert transform_distance(res.transform, truth)[0] > 45.0


def test_too_few_points():
    with pytest.raises(DegenerateCorrespondenceError):
        icp(np.zeros((2, 3)), np.ones((5, 3)))
