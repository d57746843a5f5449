"""Hard z-buffered depth rasterizer with analytic vertex gradients.

Visibility (which face wins a pixel, which pixels are covered) is frozen in
the backward pass; the rendered depth at a pixel is the screen-space
barycentric blend of the winning face's vertex depths.
"""
from dataclasses import dataclass

import numpy as np

from .autodiff import Var
from .geometry import DepthImage, TriangleMesh
from .kernels import rasterize


@dataclass
class RenderedDepth:
    depth: object           # ndarray (H, W), or Var when rendered on a tape
    mask: np.ndarray        # covered pixels
    face_id: np.ndarray     # winning face, -1 where uncovered
    bary: np.ndarray        # (H, W, 3) barycentric weights of the winning face

    @property
    def values(self):
        return self.depth.value if isinstance(self.depth, Var) else self.depth

    def to_depth_image(self):
        return DepthImage(np.where(self.mask, self.values, 0.0))


def _project(v, camera):
    z = v[:, 2]
    safe = np.where(z > 0, z, 1.0)
    return camera.fx * v[:, 0] / safe + camera.cx, camera.fy * v[:, 1] / safe + camera.cy, z


def _raster(vertices, faces, camera):
    px, py, z = _project(vertices, camera)
    depth, face_id, bary = rasterize(px, py, z, faces, camera.height, camera.width)
    mask = face_id >= 0
    return np.where(mask, depth, 0.0), mask, face_id, bary


def render_depth(mesh, camera):
    depth, mask, face_id, bary = _raster(mesh.vertices, mesh.faces, camera)
    return RenderedDepth(depth, mask, face_id, bary)


def _vertex_grad(g, vertices, faces, face_id, bary, mask, camera):
    """Gradient of sum(g * rendered depth) w.r.t. camera-frame vertices."""
    n = len(vertices)
    out = np.zeros((n, 3))
    rows, cols = np.nonzero(mask & (g != 0))
    if len(rows) == 0:
        return out
    gp = g[rows, cols]
    tri = faces[face_id[rows, cols]]
    w = bary[rows, cols]
    px, py, z = _project(vertices, camera)
    qx, qy = cols + 0.5, rows + 0.5
    ax, bx, cx = px[tri[:, 0]] - qx, px[tri[:, 1]] - qx, px[tri[:, 2]] - qx
    ay, by, cy = py[tri[:, 0]] - qy, py[tri[:, 1]] - qy, py[tri[:, 2]] - qy
    za, zb, zc = z[tri[:, 0]], z[tri[:, 1]], z[tri[:, 2]]
    area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    d = w[:, 0] * za + w[:, 1] * zb + w[:, 2] * zc
    ea, eb, ec = (za - d) / area, (zb - d) / area, (zc - d) / area
    # d(depth)/d(projected pixel position) for each corner
    dpx = np.stack([-eb * cy + ec * by, ea * cy - ec * ay, -ea * by + eb * ay], axis=1)
    dpy = np.stack([eb * cx - ec * bx, -ea * cx + ec * ax, ea * bx - eb * ax], axis=1)
    vz = z[tri]
    vx, vy = vertices[tri, 0], vertices[tri, 1]
    gx = gp[:, None] * dpx * camera.fx / vz
    gy = gp[:, None] * dpy * camera.fy / vz
    gz = gp[:, None] * (w - dpx * camera.fx * vx / vz ** 2 - dpy * camera.fy * vy / vz ** 2)
    for k in range(3):
        np.add.at(out[:, 0], tri[:, k], gx[:, k])
        np.add.at(out[:, 1], tri[:, k], gy[:, k])
        np.add.at(out[:, 2], tri[:, k], gz[:, k])
    return out


def render_depth_diff(vertices, mesh, camera):
    """Render ``vertices`` (a Var, camera frame) with ``mesh``'s topology.

    The returned ``depth`` is an (H, W) Var that is zero on uncovered pixels.
    """
    faces = mesh.faces if isinstance(mesh, TriangleMesh) else np.asarray(mesh, dtype=np.int64)
    v = vertices.value
    depth, mask, face_id, bary = _raster(v, faces, camera)
    out = vertices.tape.record(
        "render", depth, (vertices,),
        lambda g: (_vertex_grad(g, v, faces, face_id, bary, mask, camera),))
    return RenderedDepth(out, mask, face_id, bary)
