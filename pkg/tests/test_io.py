import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maskreg import io, synth
from maskreg.depthimage import CameraModel, DepthImage
from maskreg.geometry import RigidTransform, exp6, rotation_about_axis
from maskreg.posegraph import PoseGraph


def small_image(camera=None, seed=0):
    cam = camera or CameraModel(width=7, height=5, focal=10.0)
    rng = np.random.default_rng(seed)
    state = rng.integers(0, 3, size=(cam.height, cam.width)).astype(np.uint8)
    depth = np.where(state > 0, rng.uniform(0.2, 3.0, state.shape), 0.0).astype(np.float32).astype(float)
    return DepthImage(cam, state, depth)


def test_mrd_round_trip_is_bit_exact(tmp_path, box_scene):
    img = synth.render(box_scene, noise_seed=2)
    path = tmp_path / "a.mrd"
    io.write_mrd(path, img)
    back = io.read_mrd(path)
    assert back == img
    assert np.array_equal(back.depth, img.depth) and back.camera == img.camera
    assert io.encode_mrd(back) == path.read_bytes()


def test_mrd_layout():
    img = small_image()
    data = io.encode_mrd(img)
    head, payload = data.split(b"end_header\n", 1)
    assert head.startswith(b"MRD1\nwidth 7\nheight 5\n")
    assert len(payload) == 35 * 5
    assert payload[0] == img.state[0, 0]
    assert np.frombuffer(payload[1:5], "<f4")[0] == np.float32(img.depth[0, 0])


def test_mrd_anisotropic_noise_survives():
    L = np.array([[4e-6, 1e-6, 0.0], [1e-6, 9e-6, 2e-6], [0.0, 2e-6, 1.6e-5]])
    img = small_image(CameraModel(width=4, height=3, focal=5.0, noise_cov=L))
    back = io.decode_mrd(io.encode_mrd(img))
    assert np.array_equal(back.camera.L, L)
    assert b"noise_cov" not in io.encode_mrd(small_image())


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: b"MRD2" + d[4:],
        lambda d: d.replace(b"end_header\n", b"end\n"),
        lambda d: d[:-1],
        lambda d: d + b"\x00",
        lambda d: d.replace(b"width 7", b"width x"),
        lambda d: d.replace(b"width 7", b"width 0"),
        lambda d: d.replace(b"focal 10.0\n", b""),
    ],
)
def test_mrd_rejects_malformed(mutate):
    with pytest.raises(io.FormatError):
        io.decode_mrd(mutate(io.encode_mrd(small_image())))


def test_mrd_rejects_bad_state_codes():
    data = bytearray(io.encode_mrd(small_image()))
    data[data.index(b"end_header\n") + 11] = 9
    with pytest.raises(io.FormatError):
        io.decode_mrd(bytes(data))


@given(st.lists(st.floats(-3.0, 3.0), min_size=6, max_size=6))
def test_pose_vector_round_trip(v):
    T = exp6(np.r_[np.asarray(v[:3]) / max(1.0, np.linalg.norm(v[:3]) / 3.0), v[3:]])
    back = io.vector_to_pose(io.pose_to_vector(T))
    assert np.allclose(back.matrix(), T.matrix(), atol=1e-12)


def test_half_turn_is_representable():
    T = RigidTransform(rotation_about_axis([0, 0, 1], np.pi), [1.0, 0.0, 0.0])
    assert np.allclose(io.vector_to_pose(io.pose_to_vector(T)).matrix(), T.matrix(), atol=1e-12)


def test_graph_round_trip(tmp_path, rng):
    g = PoseGraph()
    for k in range(4):
        g.add_node(k, exp6(rng.normal(size=6) * 0.3))
    for k in range(4):
        A = rng.normal(size=(6, 6))
        g.add_edge(k, (k + 1) % 4, exp6(rng.normal(size=6) * 0.3), A @ A.T + np.eye(6))
    path = tmp_path / "g.txt"
    io.write_graph(path, g)
    back = io.read_graph(path)
    assert list(back.nodes) == list(g.nodes)
    for k in g.nodes:
        assert np.allclose(back.nodes[k].matrix(), g.nodes[k].matrix(), atol=1e-12)
    for a, b in zip(g.edges, back.edges):
        assert (a.source, a.target) == (b.source, b.target)
        assert np.array_equal(a.information, b.information)
        assert np.allclose(a.measurement.matrix(), b.measurement.matrix(), atol=1e-12)


@pytest.mark.parametrize(
    "text",
    ["VERTEX 0 0 0 0 0 0 0\n", "NODE 0 0 0 0 0 0\n", "EDGE 0 1 " + "0 " * 27 + "\n", "NODE a 0 0 0 0 0 0\n"],
)
def test_graph_parse_errors(text):
    with pytest.raises(io.FormatError):
        io.parse_graph(text)


def test_graph_comments_and_blank_lines():
    g = io.parse_graph("# header\n\nNODE 3 0 0 0 0 0 0  # trailing\n")
    assert list(g.nodes) == [3]


def test_transforms_csv_round_trip(tmp_path):
    rows = [(0, 1, exp6([0.1, 0.2, 0.3, 0.01, 0.02, 0.03])), (1, 2, RigidTransform.identity())]
    path = tmp_path / "t.csv"
    io.write_transforms_csv(path, rows)
    back = io.read_transforms_csv(path)
    assert [(a, b) for a, b, _ in back] == [(0, 1), (1, 2)]
    assert np.allclose(back[0][2].matrix(), rows[0][2].matrix(), atol=1e-15)
    path.write_text("a,b\n1,2\n")
    with pytest.raises(io.FormatError):
        io.read_transforms_csv(path)
