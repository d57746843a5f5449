from fractions import Fraction

import numpy as np
import pytest

from terramesh.delaunay import DegenerateInputError, delaunay_triangulate, sd_tri_baseline
from terramesh.geometry import Camera, DepthImage
from terramesh.render import render_depth


def brute_force_empty_circle(points, faces, tol=1e-9):
    """Largest violation of the empty-circumcircle property (<= 0 means none)."""
    worst = -np.inf
    for a, b, c in faces:
        pa, pb, pc = points[a], points[b], points[c]
        # circumcentre via the perpendicular-bisector linear system
        A = 2 * np.array([pb - pa, pc - pa])
        rhs = np.array([pb @ pb - pa @ pa, pc @ pc - pa @ pa])
        centre = np.linalg.solve(A, rhs)
        r = np.linalg.norm(pa - centre)
        others = np.delete(points, [a, b, c], axis=0)
        gap = r - np.linalg.norm(others - centre, axis=1)  # > 0 means strictly inside
        worst = max(worst, gap.max() / max(r, 1.0) - tol)
    return worst


def test_three_points_one_triangle():
    f = delaunay_triangulate([[0, 0], [1, 0], [0, 1]])
    assert f.shape == (1, 3) and sorted(f[0]) == [0, 1, 2]


def test_unit_square_two_triangles():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    f = delaunay_triangulate(pts)
    assert len(f) == 2
    shared = set(f[0]) & set(f[1])
    assert shared in ({0, 2}, {1, 3})


def test_orientation_is_ccw():
    rng = np.random.default_rng(3)
    pts = rng.random((40, 2))
    f = delaunay_triangulate(pts)
    a, b, c = pts[f[:, 0]], pts[f[:, 1]], pts[f[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    assert np.all(cross > 0)


def test_random_points_empty_circumcircle():
    rng = np.random.default_rng(0)
    pts = rng.random((50, 2)) * 100
    f = delaunay_triangulate(pts)
    assert brute_force_empty_circle(pts, f) <= 0


def test_covers_convex_hull_area():
    # Euler: a triangulation of n points with h on the hull has 2n - 2 - h triangles
    from scipy.spatial import ConvexHull
    rng = np.random.default_rng(1)
    for _ in range(5):
        pts = rng.random((60, 2))
        hull = ConvexHull(pts)
        assert len(delaunay_triangulate(pts)) == 2 * 60 - 2 - len(hull.vertices)


def test_pixel_lattice_with_ties():
    r, c = np.mgrid[0:6, 0:7]
    pts = np.c_[c.ravel() + 0.5, r.ravel() + 0.5]
    f = delaunay_triangulate(pts)
    assert len(f) == 2 * 5 * 6  # every lattice cell split once
    assert brute_force_empty_circle(pts, f) <= 0


def test_exact_predicates_agree_with_fractions():
    from terramesh.delaunay import incircle
    pa, pb, pc = np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])
    assert incircle(pa, pb, pc, np.array([1.0, 1.0]))[0] == 0          # cocircular
    tiny = float(Fraction(1, 2 ** 40))
    assert incircle(pa, pb, pc, np.array([1.0 - tiny, 1.0]))[0] == 1
    assert incircle(pa, pb, pc, np.array([1.0 + tiny, 1.0]))[0] == -1


@pytest.mark.parametrize("pts,msg", [
    ([[0, 0], [1, 1]], "at least 3"),
    ([[0, 0], [1, 1], [2, 2], [3, 3]], "collinear"),
    ([[0, 0], [1, 0], [0, 1], [1, 0]], "duplicate"),
])
def test_degenerate_inputs_rejected(pts, msg):
    with pytest.raises(DegenerateInputError, match=msg):
        delaunay_triangulate(pts)


def _cam():
    return Camera(40.0, 40.0, 32.0, 24.0, 64, 48)


def test_sd_tri_vertex_count_and_flat_triangle():
    c = _cam()
    d = DepthImage.from_points((48, 64), [5, 5, 30], [3, 50, 20], [12.0, 12.0, 12.0])
    m = sd_tri_baseline(d, c)
    assert m.n_vertices == 3 and len(m.faces) == 1
    np.testing.assert_allclose(m.vertices[:, 2], 12.0)
    rng = np.random.default_rng(9)
    idx = rng.choice(48 * 64, 1000, replace=False)
    d = DepthImage.from_points((48, 64), idx // 64, idx % 64, rng.uniform(10, 20, 1000))
    assert sd_tri_baseline(d, c).n_vertices == 1000


def test_sd_tri_on_depth_plane_is_exact():
    # depth affine in pixel coordinates is reproduced exactly by screen-space interpolation
    c = _cam()
    rng = np.random.default_rng(2)
    idx = rng.choice(48 * 64, 200, replace=False)
    rows, cols = idx // 64, idx % 64

    def plane(u, v):
        return 30.0 + 0.07 * u - 0.05 * v

    d = DepthImage.from_points((48, 64), rows, cols, plane(cols + 0.5, rows + 0.5))
    rd = render_depth(sd_tri_baseline(d, c), c)
    v, u = np.mgrid[0:48, 0:64] + 0.5
    assert rd.mask.sum() > 0.5 * rd.mask.size
    assert np.abs(rd.depth - plane(u, v))[rd.mask].max() < 1e-6


def test_sd_tri_interpolates_height_field_at_vertex_pixels():
    c = _cam()
    rng = np.random.default_rng(4)
    idx = rng.choice(48 * 64, 300, replace=False)
    rows, cols = idx // 64, idx % 64
    z = 25 + 3 * np.abs(np.sin(cols / 5.0)) + (cols > 30) * 4.0
    d = DepthImage.from_points((48, 64), rows, cols, z)
    rd = render_depth(sd_tri_baseline(d, c), c)
    assert rd.mask[rows, cols].all()
    assert np.abs(rd.depth[rows, cols] - z).max() < 1e-9
