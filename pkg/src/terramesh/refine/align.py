"""Project vertices into the feature pyramid and bilinearly sample each level."""
import numpy as np

from .. import autodiff as ad
from ..autodiff import Var


def _axis(s, size):
    """Clamped sample coordinate -> (i0, i1, frac, inside) along one axis."""
    inside = (s >= 0) & (s <= size - 1)
    s = np.clip(s, 0, size - 1)
    i0 = np.minimum(np.floor(s).astype(np.int64), max(size - 2, 0))
    i1 = np.minimum(i0 + 1, size - 1)
    return i0, i1, s - i0, inside


def bilinear_sample(fmap, vertices, camera):
    """Sample a (C, h, w) map at each vertex's projection; returns (n, C).

    Texel centres sit at uv = (j + 0.5) / w; outside the frame the sample
    point is clamped to the border and carries no position gradient.
    """
    tape = ad._tape_of(fmap, vertices)
    fmap, vertices = ad._wrap(fmap, tape), ad._wrap(vertices, tape)
    f, v = fmap.value, vertices.value
    c, h, w = f.shape
    z = v[:, 2]
    if np.any(z <= 1e-6):
        raise ValueError(f"vertex {int(np.flatnonzero(z <= 1e-6)[0])} is not in front of the camera")
    sx_scale, sy_scale = camera.fx * w / camera.width, camera.fy * h / camera.height
    sx = (camera.fx * v[:, 0] / z + camera.cx) * w / camera.width - 0.5
    sy = (camera.fy * v[:, 1] / z + camera.cy) * h / camera.height - 0.5
    x0, x1, ax, inx = _axis(sx, w)
    y0, y1, ay, iny = _axis(sy, h)
    f00, f01, f10, f11 = f[:, y0, x0], f[:, y0, x1], f[:, y1, x0], f[:, y1, x1]
    out = (f00 * (1 - ax) * (1 - ay) + f01 * ax * (1 - ay) + f10 * (1 - ax) * ay + f11 * ax * ay).T

    def back(g):
        gt = g.T  # (C, n)
        df = np.zeros((c, h * w))
        for yy, xx, wt in ((y0, x0, (1 - ax) * (1 - ay)), (y0, x1, ax * (1 - ay)),
                           (y1, x0, (1 - ax) * ay), (y1, x1, ax * ay)):
            np.add.at(df.T, yy * w + xx, (gt * wt).T)
        dsx = np.where(inx, ((f01 - f00) * (1 - ay) + (f11 - f10) * ay) * gt, 0.0).sum(0)
        dsy = np.where(iny, ((f10 - f00) * (1 - ax) + (f11 - f01) * ax) * gt, 0.0).sum(0)
        dv = np.stack([dsx * sx_scale / z, dsy * sy_scale / z,
                       -(dsx * sx_scale * v[:, 0] + dsy * sy_scale * v[:, 1]) / z ** 2], axis=1)
        return df.reshape(c, h, w), dv

    return tape.record("bilinear", out, (fmap, vertices), back)


def align_features(vertices, camera, pyramid):
    """Per-vertex features: samples from every level, then the vertex xyz."""
    if not isinstance(vertices, Var):
        vertices = pyramid[0].tape.constant(np.asarray(vertices, dtype=np.float64))
    return ad.concat([bilinear_sample(level, vertices, camera) for level in pyramid] + [vertices], axis=1)
