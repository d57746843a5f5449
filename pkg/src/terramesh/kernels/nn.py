"""Exact nearest neighbours between 3-D point clouds.

The accelerated path buckets the target cloud into a uniform grid of columns
over its two widest axes (surface samples of terrain are nearly 2.5-D) and
searches square rings of columns outward from each query until no unscanned
column can hold a closer point.
"""
import numpy as np

from .._accel import njit, pick

CELL_FACTOR = 2.0
MAX_CELLS_PER_AXIS = 1024


@njit
def _probe_nn(src, probes, q):
    # distance from each probe point of src to its nearest distinct point of q
    out = np.full(probes.shape[0], np.inf)
    for a in range(probes.shape[0]):
        i = probes[a]
        for j in range(q.shape[0]):
            dx = src[i, 0] - q[j, 0]
            dy = src[i, 1] - q[j, 1]
            dz = src[i, 2] - q[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if 0 < d2 < out[a]:
                out[a] = d2
    return np.sqrt(out)


def median_spacing(q, probes=64):
    """Median nearest-neighbour spacing of ``q`` estimated from evenly spread probes."""
    if len(q) < 2:
        return 0.0
    idx = np.linspace(0, len(q) - 1, min(len(q), probes)).astype(np.int64)
    nn = _probe_nn(q, idx, q)
    nn = nn[np.isfinite(nn)]
    return float(np.median(nn)) if len(nn) else 0.0


def grid_layout(q):
    """(axes, origin, cell edge, cells per axis) of the column grid over ``q``."""
    ext = q.max(0) - q.min(0)
    axes = np.sort(np.argsort(-ext, kind="stable")[:2])
    span = ext[axes]
    h = CELL_FACTOR * median_spacing(q)
    h = max(h, float(span.max()) / MAX_CELLS_PER_AXIS)
    if not h > 0:
        h = 1.0
    dims = np.floor(span / h).astype(np.int64) + 1
    return axes, q.min(0)[axes], h, dims


@njit
def _nn_columns(p, q, ax0, ax1, ox, oy, h, nx, ny):
    nq = q.shape[0]
    cell = np.empty(nq, dtype=np.int64)
    start = np.zeros(nx * ny + 1, dtype=np.int64)
    for j in range(nq):
        cx = min(max(int((q[j, ax0] - ox) / h), 0), nx - 1)
        cy = min(max(int((q[j, ax1] - oy) / h), 0), ny - 1)
        cell[j] = cx * ny + cy
        start[cell[j] + 1] += 1
    for c in range(nx * ny):
        start[c + 1] += start[c]
    fill = start[:-1].copy()
    order = np.empty(nq, dtype=np.int64)
    for j in range(nq):  # stable: lower indices first within a column
        order[fill[cell[j]]] = j
        fill[cell[j]] += 1

    idx = np.empty(p.shape[0], dtype=np.int64)
    dist2 = np.empty(p.shape[0])
    max_ring = max(nx, ny)
    for i in range(p.shape[0]):
        cx = min(max(int((p[i, ax0] - ox) / h), 0), nx - 1)
        cy = min(max(int((p[i, ax1] - oy) / h), 0), ny - 1)
        best = np.inf
        bestj = -1
        r = 0
        while True:
            for dx in range(-r, r + 1):
                x = cx + dx
                if x < 0 or x >= nx:
                    continue
                step = 1 if (dx == -r or dx == r) else 2 * r
                dy = -r
                while dy <= r:
                    y = cy + dy
                    if 0 <= y < ny:
                        c = x * ny + y
                        for k in range(start[c], start[c + 1]):
                            j = order[k]
                            ex = p[i, 0] - q[j, 0]
                            ey = p[i, 1] - q[j, 1]
                            ez = p[i, 2] - q[j, 2]
                            d2 = ex * ex + ey * ey + ez * ez
                            if d2 < best or (d2 == best and j < bestj):
                                best = d2
                                bestj = j
                    dy += step
            # every unscanned column is at least r * h away in the grid plane
            if (bestj >= 0 and best <= (r * h) * (r * h)) or r >= max_ring:
                break
            r += 1
        idx[i] = bestj
        dist2[i] = best
    return idx, dist2


def nearest_neighbors_numba(p, q):
    axes, origin, h, dims = grid_layout(q)
    return _nn_columns(p, q, int(axes[0]), int(axes[1]), float(origin[0]), float(origin[1]),
                       float(h), int(dims[0]), int(dims[1]))


def nearest_neighbors_numpy(p, q, chunk=128):
    idx = np.empty(len(p), dtype=np.int64)
    dist2 = np.empty(len(p))
    for s in range(0, len(p), chunk):
        d2 = ((p[s:s + chunk, None, :] - q[None, :, :]) ** 2).sum(-1)
        j = d2.argmin(axis=1)
        idx[s:s + chunk] = j
        dist2[s:s + chunk] = d2[np.arange(len(j)), j]
    return idx, dist2


_impl = pick(nearest_neighbors_numba, nearest_neighbors_numpy)


def nearest_neighbors(p, q):
    """Index into ``q`` of each point of ``p``'s nearest neighbour, and squared distance.

    Exact; equal distances resolve to the lower index in ``q``.
    """
    p = np.ascontiguousarray(p, dtype=np.float64).reshape(-1, 3)
    q = np.ascontiguousarray(q, dtype=np.float64).reshape(-1, 3)
    if len(p) == 0 or len(q) == 0:
        raise ValueError("nearest-neighbour search needs two non-empty clouds")
    return _impl(p, q)
