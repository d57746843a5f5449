import json

import numpy as np
import pytest

from terramesh import io
from terramesh.geometry import (Camera, DepthImage, TriangleMesh, back_project, edges_from_faces,
                                make_grid_mesh, project_vertices, pseudo_gt_mesh, to_camera, to_world)
from terramesh.render import render_depth


def cam(w=64, h=48, **kw):
    return Camera(60.0, 55.0, w / 2 + 0.3, h / 2 - 0.7, w, h, **kw)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def test_grid_mesh_counts():
    m = make_grid_mesh(32, 32, cam(), 10.0)
    assert m.n_vertices == 1024 and len(m.faces) == 2 * 31 * 31
    m = make_grid_mesh(2, 2, cam(), 10.0)
    assert (m.n_vertices, len(m.faces), len(m.edges)) == (4, 2, 5)
    assert make_grid_mesh(24, 24, cam(), 10.0).n_vertices == 576


def test_grid_mesh_rejects_small():
    with pytest.raises(ValueError):
        make_grid_mesh(1, 5, cam(), 10.0)
    with pytest.raises(ValueError):
        make_grid_mesh(3, 3, cam(), 0.0)


def test_grid_winding_faces_camera():
    m = make_grid_mesh(7, 5, cam(), 20.0)
    v = m.vertices
    n = np.cross(v[m.faces[:, 1]] - v[m.faces[:, 0]], v[m.faces[:, 2]] - v[m.faces[:, 0]])
    assert np.all(n @ np.array([0.0, 0.0, 1.0]) > 0)


def test_grid_spans_image_and_projects_to_lattice():
    c = cam()
    m = make_grid_mesh(4, 5, c, 12.0)
    pr = project_vertices(m, c)
    assert pr.uv.min() == pytest.approx(0.0, abs=1e-12) and pr.uv.max() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(np.unique(np.round(pr.uv[:, 0], 9)), np.linspace(0, 1, 5), atol=1e-9)


def test_edges_match_faces():
    faces = np.array([[0, 1, 2], [2, 1, 3]])
    np.testing.assert_array_equal(edges_from_faces(faces), [[0, 1], [0, 2], [1, 2], [1, 3], [2, 3]])
    m = TriangleMesh(np.zeros((4, 3)), faces)
    np.testing.assert_array_equal(m.edges, edges_from_faces(m.faces))
    with pytest.raises(ValueError):
        m.faces[0, 0] = 3  # topology is read-only


def test_face_index_range_checked():
    with pytest.raises(ValueError):
        TriangleMesh(np.zeros((2, 3)), [[0, 1, 2]])


def test_camera_validation_and_json_roundtrip(tmp_path):
    with pytest.raises(ValueError):
        Camera(10, 10, 5, 5, 10, 10, R=np.ones((3, 3)))
    with pytest.raises(ValueError):
        Camera(-1, 10, 5, 5, 10, 10)
    c = Camera(50, 51, 31.5, 22.25, 64, 48, random_rotation(np.random.default_rng(0)), [1.0, -2.0, 3.5])
    io.write_camera(tmp_path / "cam.json", c)
    d = json.loads((tmp_path / "cam.json").read_text())
    assert set(d) == {"fx", "fy", "cx", "cy", "width", "height", "R", "p"} and len(d["R"]) == 9
    c2 = io.read_camera(tmp_path / "cam.json")
    np.testing.assert_array_equal(c2.R, c.R)
    np.testing.assert_array_equal(c2.p, c.p)
    assert (c2.fx, c2.cy, c2.width) == (c.fx, c.cy, c.width)


def test_depth_image_convention():
    d = DepthImage.from_points((4, 5), [0, 3], [1, 4], [2.0, 7.5])
    assert d.n_valid() == 2 and d.depth[3, 4] == 7.5 and d.depth[0, 0] == 0
    with pytest.raises(ValueError):
        DepthImage(np.array([[1.0, -1.0]]))


def test_to_world_examples():
    m = make_grid_mesh(3, 3, cam(), 5.0)
    np.testing.assert_array_equal(to_world(m, cam()).vertices, m.vertices)
    shifted = to_world(m, cam(p=[10.0, 0, 0]))
    np.testing.assert_allclose(shifted.vertices - m.vertices, np.tile([10.0, 0, 0], (9, 1)))
    np.testing.assert_array_equal(shifted.faces, m.faces)


def test_to_world_rigid_and_round_trip():
    rng = np.random.default_rng(3)
    c = cam(R=random_rotation(rng), p=rng.normal(size=3) * 100)
    m = TriangleMesh(rng.normal(size=(30, 3)) * 10, [[0, 1, 2]])
    w = to_world(m, c)
    d0 = np.linalg.norm(m.vertices[:, None] - m.vertices[None], axis=-1)
    d1 = np.linalg.norm(w.vertices[:, None] - w.vertices[None], axis=-1)
    assert np.abs(d0 - d1).max() < 1e-9
    assert np.abs(to_camera(w, c).vertices - m.vertices).max() < 1e-9


def test_projection_examples():
    c = cam()
    pr = project_vertices(np.array([[0.0, 0.0, 3.0], [0.0, 0.0, 300.0]]), c)
    np.testing.assert_allclose(pr.uv, [[c.cx / c.width, c.cy / c.height]] * 2)
    a = project_vertices(np.array([[1.0, 0.0, 20.0], [2.0, 0.0, 20.0]]), c).pixels[:, 0] - c.cx
    assert a[1] == pytest.approx(2 * a[0])


def test_projection_flags_and_round_trip():
    rng = np.random.default_rng(4)
    c = cam()
    v = np.c_[rng.uniform(-10, 10, (200, 2)), rng.uniform(1, 50, 200)]
    pr = project_vertices(v, c)
    back = back_project(c, pr.pixels[:, 0], pr.pixels[:, 1], v[:, 2])
    assert np.abs(back - v).max() < 1e-9
    pr = project_vertices(np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 0.0], [100.0, 0.0, 1.0]]), c)
    assert not pr.in_front[0] and not pr.in_front[1]
    assert not pr.in_frame.any()
    assert np.isnan(pr.uv[:2]).all()
    np.testing.assert_array_equal(pr.clamped_uv()[2], [1.0, c.cy / c.height])


def test_pseudo_gt_mesh_sizes_and_values():
    c = cam(32, 24)
    flat = DepthImage(np.full((24, 32), 8.0))
    m = pseudo_gt_mesh(flat, c, stride=1)
    assert m.n_vertices == 24 * 32
    np.testing.assert_allclose(m.vertices[:, 2], 8.0)
    m3 = pseudo_gt_mesh(flat, c, stride=5)
    assert m3.n_vertices == 6 * 8  # lattices 0,5,..,20,23 and 0,5,..,30,31
    bad = np.full((24, 32), 8.0)
    bad[5, 10] = 0
    with pytest.raises(ValueError, match="row=5, col=10"):
        pseudo_gt_mesh(DepthImage(bad), c, stride=5)


def test_pseudo_gt_512_vertex_count():
    c = Camera(400.0, 400.0, 256.0, 256.0, 512, 512)
    assert pseudo_gt_mesh(DepthImage(np.full((512, 512), 30.0)), c).n_vertices == 512 * 512


def test_pseudo_gt_rerender_round_trip():
    c = cam(40, 30)
    r, col = np.mgrid[0:30, 0:40]
    d = 20 + 0.05 * col + 0.03 * r + 0.5 * np.sin(col / 6.0)
    m = pseudo_gt_mesh(DepthImage(d), c, stride=1)
    rd = render_depth(m, c)
    assert rd.mask.all()
    assert np.abs(rd.depth - d).max() < 1e-6


def test_obj_roundtrip(tmp_path):
    m = make_grid_mesh(3, 4, cam(), 7.123456789)
    io.write_obj(tmp_path / "m.obj", m)
    m2 = io.read_obj(tmp_path / "m.obj")
    np.testing.assert_array_equal(m2.faces, m.faces)
    np.testing.assert_allclose(m2.vertices, m.vertices, rtol=1e-8)


def test_pfm_and_ppm_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    d = rng.uniform(1, 100, (7, 9)).astype(np.float32).astype(np.float64)
    d[2, 3] = 0.0
    io.write_pfm(tmp_path / "d.pfm", d)
    raw = (tmp_path / "d.pfm").read_bytes()
    assert raw.startswith(b"Pf\n9 7\n-1.0\n")
    np.testing.assert_array_equal(io.read_pfm(tmp_path / "d.pfm"), d)
    img = rng.integers(0, 256, (5, 6, 3)) / 255.0
    io.write_ppm(tmp_path / "i.ppm", img)
    assert (tmp_path / "i.ppm").read_bytes().startswith(b"P6\n6 5\n255\n")
    np.testing.assert_allclose(io.read_ppm(tmp_path / "i.ppm"), img, atol=1e-12)
