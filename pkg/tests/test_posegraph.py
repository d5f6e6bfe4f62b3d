import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maskreg.geometry import RigidTransform, compose, exp6, invert, rotation_about_axis, transform_distance
from maskreg.posegraph import (
    DisconnectedGraphError,
    OptimizeConfig,
    PoseEdge,
    PoseGraph,
    add_registration,
    chi2,
    dead_reckoning,
    edge_residual,
    information_from_covariance,
    loop_error,
    optimize,
)

I6 = np.eye(6)
vec6 = st.lists(st.floats(-0.5, 0.5), min_size=6, max_size=6)


def ring(n=14, step_deg=360 / 14):
    """True poses of an object turning on a turntable, and the exact step."""
    c = np.array([0.0, 0.0, 0.8])
    R = rotation_about_axis([0.0, 1.0, 0.0], np.radians(step_deg))
    step = RigidTransform(R, c - R @ c)
    poses = [RigidTransform.identity()]
    for _ in range(n - 1):
        poses.append(compose(poses[-1], step))
    return poses, step


def test_residual_zero_when_consistent():
    Xi, Xj = exp6([0.1, 0.2, 0.3, 1, 2, 3]), exp6([-0.3, 0.1, 0.0, 0.5, 0, 1])
    e = PoseEdge(0, 1, compose(invert(Xi), Xj), I6)
    assert np.allclose(edge_residual(e, {0: Xi, 1: Xj}), 0.0, atol=1e-12)


def test_translation_offset_in_source_frame():
    R = rotation_about_axis([1.0, 1.0, 0.0], 0.7)
    d = np.array([0.01, -0.02, 0.03])
    e = PoseEdge(0, 1, RigidTransform.identity(), I6)
    r = edge_residual(e, {0: RigidTransform(R, np.zeros(3)), 1: RigidTransform(R, d)})
    assert np.allclose(r, np.r_[0, 0, 0, R.T @ d], atol=1e-12)


@given(vec6, vec6, vec6)
def test_reversed_edge_has_same_cost(a, b, z):
    Xi, Xj, Z = exp6(a), exp6(b), exp6(z)
    poses = {0: Xi, 1: Xj}
    fwd = PoseEdge(0, 1, Z, I6)
    rev = PoseEdge(1, 0, invert(Z), I6)
    r1, r2 = edge_residual(fwd, poses), edge_residual(rev, poses)
    assert np.isclose(np.linalg.norm(r1[:3]), np.linalg.norm(r2[:3]), atol=1e-9)


@given(vec6, vec6)
def test_chi2_is_gauge_invariant(g, z):
    poses, step = ring(5)
    graph = PoseGraph()
    for k, p in enumerate(poses):
        graph.add_node(k, p)
    for k in range(4):
        graph.add_edge(k, k + 1, compose(step, exp6(np.asarray(z) * 0.01 * k)), I6)
    G = exp6(g)
    moved = {k: compose(G, p) for k, p in graph.nodes.items()}
    assert np.isclose(chi2(graph, moved), chi2(graph), rtol=1e-9, atol=1e-12)


def test_exact_chain_has_zero_chi2_and_matches_dead_reckoning():
    poses, step = ring(6)
    transforms = [invert(step)] * 5  # registration k -> k+1 carries the object back
    dr = dead_reckoning(transforms)
    graph = PoseGraph()
    for k, p in enumerate(dr):
        graph.add_node(k, p)
    for k in range(5):
        add_registration(graph, k, k + 1, transforms[k], np.eye(6) * 1e-4)
    assert chi2(graph) < 1e-20
    for a, b in zip(dr, poses):
        assert np.allclose(a.matrix(), b.matrix(), atol=1e-12)
    res = optimize(graph)
    assert res.chi2 < 1e-20
    for k in range(6):
        assert np.allclose(res.poses[k].matrix(), dr[k].matrix(), atol=1e-9)


def test_loop_with_one_bad_low_information_edge():
    poses, step = ring(14)
    graph = PoseGraph()
    init = [compose(p, exp6(np.r_[0.02 * np.sin(k), 0.01, 0.0, 0.005, 0.0, -0.004])) if k else p
            for k, p in enumerate(poses)]
    for k, p in enumerate(init):
        graph.add_node(k, p)
    for k in range(13):
        graph.add_edge(k, k + 1, step, I6 * 1e6)
    bad = compose(step, exp6([0.05, 0.0, 0.0, 0.02, 0.0, 0.0]))
    graph.add_edge(13, 0, bad, I6 * 1e-3)
    res = optimize(graph, OptimizeConfig(max_iter=200))
    for k in range(14):
        deg, m = transform_distance(res.poses[k], poses[k])
        assert np.radians(deg) < 1e-6 and m < 1e-6
    assert np.all(np.diff(res.chi2_trace) <= 0)
    assert res.poses[0] is graph.nodes[0]


def test_loop_closure_spreads_drift():
    poses, step = ring(14)
    rng = np.random.default_rng(3)
    meas = [compose(step, exp6(rng.normal(size=6) * [0, 0.01, 0, 0.002, 0, 0.002])) for _ in range(14)]
    graph = PoseGraph()
    chain = [RigidTransform.identity()]
    for Z in meas[:-1]:
        chain.append(compose(chain[-1], Z))
    for k, p in enumerate(chain):
        graph.add_node(k, p)
    for k in range(14):
        graph.add_edge(k, (k + 1) % 14, meas[k], I6)
    closing = graph.edges[-1]
    before = loop_error(closing, graph.nodes)
    res = optimize(graph)
    after = loop_error(closing, res.poses)
    assert after[0] < before[0] / 5 and after[1] < before[1] / 2
    assert res.chi2_trace[-1] < res.chi2_trace[0]


def test_disconnected_and_missing_nodes():
    graph = PoseGraph()
    for k in range(3):
        graph.add_node(k, RigidTransform.identity())
    graph.add_edge(0, 1, RigidTransform.identity(), I6)
    with pytest.raises(DisconnectedGraphError):
        optimize(graph)
    graph.add_edge(1, 7, RigidTransform.identity(), I6)
    with pytest.raises(ValueError):
        graph.check_connected()
    with pytest.raises(ValueError):
        graph.add_node(0, RigidTransform.identity())


def test_single_node_graph():
    graph = PoseGraph()
    graph.add_node(4, exp6([0, 0, 1, 0, 0, 0]))
    res = optimize(graph)
    assert res.iterations == 0 and res.chi2 == 0.0


def test_edge_validation():
    with pytest.raises(ValueError):
        PoseEdge(0, 1, RigidTransform.identity(), np.eye(5))
    with pytest.raises(ValueError):
        PoseEdge(0, 1, RigidTransform.identity(), np.diag([1, 1, 1, 1, 1, 0.0]))


def test_information_floor():
    cov = np.diag([1e-4, 1e-4, 0.0, 1e-6, -1e-12, 1e-6])
    info = information_from_covariance(cov)
    assert np.allclose(np.diag(info), [1e4, 1e4, 1e8, 1e6, 1e8, 1e6])
    assert np.allclose(information_from_covariance(np.eye(6) * 4.0), np.eye(6) / 4.0)
