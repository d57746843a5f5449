import numpy as np

from .._accel import njit, pick

Z_NEAR = 1e-6
INSIDE_EPS = 1e-10


@njit
def rasterize_numba(px, py, z, faces, height, width):
    depth = np.full((height, width), np.inf)
    face_id = np.full((height, width), -1, dtype=np.int64)
    bary = np.zeros((height, width, 3))
    for f in range(faces.shape[0]):
        a, b, c = faces[f, 0], faces[f, 1], faces[f, 2]
        za, zb, zc = z[a], z[b], z[c]
        if za <= Z_NEAR or zb <= Z_NEAR or zc <= Z_NEAR:
            continue
        ax, ay, bx, by, cx, cy = px[a], py[a], px[b], py[b], px[c], py[c]
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if abs(area) < 1e-14:
            continue
        x0 = max(int(np.floor(min(ax, bx, cx) - 0.5)), 0)
        x1 = min(int(np.ceil(max(ax, bx, cx) - 0.5)), width - 1)
        y0 = max(int(np.floor(min(ay, by, cy) - 0.5)), 0)
        y1 = min(int(np.ceil(max(ay, by, cy) - 0.5)), height - 1)
        for y in range(y0, y1 + 1):
            qy = y + 0.5
            for x in range(x0, x1 + 1):
                qx = x + 0.5
                w0 = ((bx - qx) * (cy - qy) - (by - qy) * (cx - qx)) / area
                w1 = ((cx - qx) * (ay - qy) - (cy - qy) * (ax - qx)) / area
                w2 = ((ax - qx) * (by - qy) - (ay - qy) * (bx - qx)) / area
                if w0 < -INSIDE_EPS or w1 < -INSIDE_EPS or w2 < -INSIDE_EPS:
                    continue
                d = w0 * za + w1 * zb + w2 * zc
                if d < depth[y, x]:
                    depth[y, x] = d
                    face_id[y, x] = f
                    bary[y, x, 0] = w0
                    bary[y, x, 1] = w1
                    bary[y, x, 2] = w2
    return depth, face_id, bary


def rasterize_numpy(px, py, z, faces, height, width):
    depth = np.full((height, width), np.inf)
    face_id = np.full((height, width), -1, dtype=np.int64)
    bary = np.zeros((height, width, 3))
    zf = z[faces]
    keep = np.all(zf > Z_NEAR, axis=1)
    fx, fy = px[faces], py[faces]
    area = (fx[:, 1] - fx[:, 0]) * (fy[:, 2] - fy[:, 0]) - (fy[:, 1] - fy[:, 0]) * (fx[:, 2] - fx[:, 0])
    keep &= np.abs(area) >= 1e-14
    x0 = np.maximum(np.floor(fx.min(1) - 0.5), 0)
    x1 = np.minimum(np.ceil(fx.max(1) - 0.5), width - 1)
    y0 = np.maximum(np.floor(fy.min(1) - 0.5), 0)
    y1 = np.minimum(np.ceil(fy.max(1) - 0.5), height - 1)
    keep &= (x1 >= x0) & (y1 >= y0)
    for f in np.flatnonzero(keep):
        (ax, bx, cx), (ay, by, cy), (za, zb, zc) = fx[f], fy[f], zf[f]
        ys = np.arange(int(y0[f]), int(y1[f]) + 1)
        xs = np.arange(int(x0[f]), int(x1[f]) + 1)
        qy = (ys + 0.5)[:, None]
        qx = (xs + 0.5)[None, :]
        w0 = ((bx - qx) * (cy - qy) - (by - qy) * (cx - qx)) / area[f]
        w1 = ((cx - qx) * (ay - qy) - (cy - qy) * (ax - qx)) / area[f]
        w2 = ((ax - qx) * (by - qy) - (ay - qy) * (bx - qx)) / area[f]
        d = w0 * za + w1 * zb + w2 * zc
        win = (w0 >= -INSIDE_EPS) & (w1 >= -INSIDE_EPS) & (w2 >= -INSIDE_EPS)
        win &= d < depth[ys[0]:ys[-1] + 1, xs[0]:xs[-1] + 1]
        if not win.any():
            continue
        r, c = np.nonzero(win)
        yy, xx = ys[r], xs[c]
        depth[yy, xx] = d[r, c]
        face_id[yy, xx] = f
        bary[yy, xx, 0] = w0[r, c]
        bary[yy, xx, 1] = w1[r, c]
        bary[yy, xx, 2] = w2[r, c]
    return depth, face_id, bary


_impl = pick(rasterize_numba, rasterize_numpy)


def rasterize(px, py, z, faces, height, width):
    """Z-buffered hard rasterization sampled at pixel centres.

    Returns (depth with inf where uncovered, winning face id or -1,
    barycentric weights). Triangles are closed, so a pixel centre on a
    shared edge goes to the nearer face, or to the lower face index on a tie.
    """
    faces = np.ascontiguousarray(faces, dtype=np.int64).reshape(-1, 3)
    return _impl(np.ascontiguousarray(px, dtype=np.float64), np.ascontiguousarray(py, dtype=np.float64),
                 np.ascontiguousarray(z, dtype=np.float64), faces, int(height), int(width))
