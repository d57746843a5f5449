import numpy as np

from .._accel import njit, pick

FAR = 1e20


@njit
def _dt1d(f, d, v, z):
    n = f.shape[0]
    k = 0
    v[0] = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) * (q - v[k]) + f[v[k]]


@njit
def edt_sq_numba(mask):
    h, w = mask.shape
    g = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            g[i, j] = 0.0 if mask[i, j] else FAR
    n = max(h, w)
    f = np.empty(n)
    d = np.empty(n)
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1)
    for j in range(w):
        for i in range(h):
            f[i] = g[i, j]
        _dt1d(f[:h], d[:h], v, z)
        for i in range(h):
            g[i, j] = d[i]
    for i in range(h):
        for j in range(w):
            f[j] = g[i, j]
        _dt1d(f[:w], d[:w], v, z)
        for j in range(w):
            g[i, j] = d[j]
    return g


def edt_sq_numpy(mask):
    h, w = mask.shape
    # squared distance to the nearest valid pixel in the same column
    up = np.full((h, w), np.inf)
    last = np.full(w, -np.inf)
    for i in range(h):
        last = np.where(mask[i], i, last)
        up[i] = i - last
    down = np.full((h, w), np.inf)
    nxt = np.full(w, np.inf)
    for i in range(h - 1, -1, -1):
        nxt = np.where(mask[i], i, nxt)
        down[i] = nxt - i
    col = np.minimum(up, down)
    g = np.where(np.isfinite(col), col * col, FAR)
    cols = np.arange(w)
    off2 = (cols[:, None] - cols[None, :]) ** 2.0
    out = np.empty((h, w))
    for i in range(h):
        out[i] = (g[i][None, :] + off2).min(axis=1)
    return out


_impl = pick(edt_sq_numba, edt_sq_numpy)


def edt_sq(mask):
    """Exact squared Euclidean distance (pixels) to the nearest True entry."""
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    return _impl(mask)
