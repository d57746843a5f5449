"""Incremental (Bowyer-Watson) Delaunay triangulation and the SD-tri baseline.

Predicates run in floating point with a static error bound; only results
inside the bound are recomputed exactly with rationals. A point on a
circumcircle does not count as inside, so cocircular ties keep the earlier
triangles and the output depends only on insertion order.
"""
from fractions import Fraction

import numpy as np

from .geometry import TriangleMesh, back_project

SUPER_SCALE = 1e5
_EPS = np.finfo(np.float64).eps
_ICC_BOUND = (10.0 + 96.0 * _EPS) * _EPS
_CCW_BOUND = (3.0 + 16.0 * _EPS) * _EPS


class DegenerateInputError(ValueError):
    pass


def _incircle_exact(a, b, c, d):
    ax, ay = Fraction(a[0]) - Fraction(d[0]), Fraction(a[1]) - Fraction(d[1])
    bx, by = Fraction(b[0]) - Fraction(d[0]), Fraction(b[1]) - Fraction(d[1])
    cx, cy = Fraction(c[0]) - Fraction(d[0]), Fraction(c[1]) - Fraction(d[1])
    det = ((ax * ax + ay * ay) * (bx * cy - cx * by)
           + (bx * bx + by * by) * (cx * ay - ax * cy)
           + (cx * cx + cy * cy) * (ax * by - bx * ay))
    return (det > 0) - (det < 0)


def incircle(pa, pb, pc, d):
    """Sign of the in-circle determinant for CCW triangles (rows of pa, pb, pc) vs point d.

    Positive means d is strictly inside the circumcircle.
    """
    adx, ady = pa[:, 0] - d[0], pa[:, 1] - d[1]
    bdx, bdy = pb[:, 0] - d[0], pb[:, 1] - d[1]
    cdx, cdy = pc[:, 0] - d[0], pc[:, 1] - d[1]
    alift, blift, clift = adx * adx + ady * ady, bdx * bdx + bdy * bdy, cdx * cdx + cdy * cdy
    bc, ca, ab = bdx * cdy - cdx * bdy, cdx * ady - adx * cdy, adx * bdy - bdx * ady
    det = alift * bc + blift * ca + clift * ab
    perm = ((np.abs(bdx * cdy) + np.abs(cdx * bdy)) * alift
            + (np.abs(cdx * ady) + np.abs(adx * cdy)) * blift
            + (np.abs(adx * bdy) + np.abs(bdx * ady)) * clift)
    sign = np.sign(det).astype(np.int64)
    for k in np.flatnonzero(np.abs(det) <= _ICC_BOUND * perm):
        sign[k] = _incircle_exact(pa[k], pb[k], pc[k], d)
    return sign


def orient(a, b, c):
    """Exact sign of the 2-D orientation determinant (positive: counter-clockwise)."""
    det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    bound = _CCW_BOUND * (abs((b[0] - a[0]) * (c[1] - a[1])) + abs((b[1] - a[1]) * (c[0] - a[0])))
    if abs(det) > bound:
        return 1 if det > 0 else -1
    fa, fb, fc = [tuple(Fraction(x) for x in p) for p in (a, b, c)]
    e = (fb[0] - fa[0]) * (fc[1] - fa[1]) - (fb[1] - fa[1]) * (fc[0] - fa[0])
    return (e > 0) - (e < 0)


def _check_input(pts):
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateInputError(f"expected an (n, 2) point array, got shape {pts.shape}")
    if len(pts) < 3:
        raise DegenerateInputError(f"need at least 3 points, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateInputError("non-finite point coordinates")
    uniq = np.unique(pts, axis=0)
    if len(uniq) != len(pts):
        raise DegenerateInputError(f"{len(pts) - len(uniq)} duplicate points")
    a, b = pts[0], pts[1]
    if not any(orient(a, b, c) != 0 for c in pts[2:]):
        raise DegenerateInputError("all points are collinear")


def delaunay_triangulate(points):
    """Delaunay triangles of 2-D ``points`` as an (m, 3) index array, counter-clockwise."""
    pts = np.asarray(points, dtype=np.float64)
    _check_input(pts)
    n = len(pts)
    lo, hi = pts.min(0), pts.max(0)
    centre = (lo + hi) / 2
    r = SUPER_SCALE * max(float((hi - lo).max()), 1.0)
    ang = np.radians([90.0, 210.0, 330.0])
    allp = np.vstack([pts, centre + r * np.c_[np.cos(ang), np.sin(ang)]])

    cap = 2 * n + 16
    tris = np.empty((cap, 3), dtype=np.int64)
    alive = np.zeros(cap, dtype=bool)
    tris[0] = (n, n + 1, n + 2)
    alive[0] = True
    count = 1
    for i in range(n):
        d = allp[i]
        live = np.flatnonzero(alive[:count])
        t = tris[live]
        inside = incircle(allp[t[:, 0]], allp[t[:, 1]], allp[t[:, 2]], d) > 0
        bad = live[inside]
        if len(bad) == 0:  # pragma: no cover - impossible with exact predicates
            raise RuntimeError(f"point {i} lies in no circumcircle")
        bt = tris[bad]
        directed = np.concatenate([bt[:, [0, 1]], bt[:, [1, 2]], bt[:, [2, 0]]])
        key = directed[:, 0] * (n + 3) + directed[:, 1]
        rkey = directed[:, 1] * (n + 3) + directed[:, 0]
        boundary = directed[~np.isin(key, rkey)]
        alive[bad] = False
        m = len(boundary)
        if count + m > cap:
            keep = np.flatnonzero(alive[:count])
            cap = max(2 * (len(keep) + m), cap)
            new_tris = np.empty((cap, 3), dtype=np.int64)
            new_tris[:len(keep)] = tris[keep]
            tris = new_tris
            alive = np.zeros(cap, dtype=bool)
            alive[:len(keep)] = True
            count = len(keep)
        tris[count:count + m, :2] = boundary
        tris[count:count + m, 2] = i
        alive[count:count + m] = True
        count += m
    out = tris[np.flatnonzero(alive[:count])]
    return out[np.all(out < n, axis=1)]


def sd_tri_baseline(sparse, camera):
    """Mesh whose vertices are the valid sparse-depth pixels, lifted by their depths."""
    rows, cols = np.nonzero(sparse.mask)
    px, py = cols + 0.5, rows + 0.5
    faces = delaunay_triangulate(np.c_[px, py])
    return TriangleMesh(back_project(camera, px, py, sparse.depth[rows, cols]), faces)
