"""Mesh, camera and depth-image types plus the mesh constructors.

Camera frame: x right, y down (image rows), z forward along the optical axis.
Depth means camera-frame z. A camera's rotation ``R`` maps camera-frame
vectors to the world frame, so row-vector vertices go to the world as
``V @ R.T + p``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def edges_from_faces(faces):
    """Unique undirected edges (sorted pairs) induced by ``faces``."""
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(faces) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray
    edges: np.ndarray = field(default=None)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError(f"face index out of range for {len(v)} vertices")
        e = edges_from_faces(f) if self.edges is None else np.array(self.edges, dtype=np.int64)
        f.flags.writeable = False
        e.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "edges", e)

    @property
    def n_vertices(self):
        return len(self.vertices)

    def with_vertices(self, vertices):
        """Same topology, new vertex positions."""
        vertices = np.asarray(vertices, dtype=np.float64)
        if vertices.shape != self.vertices.shape:
            raise ValueError(f"vertex array shape {vertices.shape} != {self.vertices.shape}")
        return TriangleMesh(vertices, self.faces, self.edges)

    def face_areas(self):
        v = self.vertices
        a, b, c = v[self.faces[:, 0]], v[self.faces[:, 1]], v[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


@dataclass(frozen=True)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.R, dtype=np.float64).reshape(3, 3)
        p = np.array(self.p, dtype=np.float64).reshape(3)
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image size must be positive")
        if np.abs(R.T @ R - np.eye(3)).max() > 1e-9:
            raise ValueError("R is not orthonormal")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @classmethod
    def nadir(cls, width, height, fov_deg, position):
        """Downward-looking camera: image x along world +X, image y along world -Y."""
        f = 0.5 * width / np.tan(np.radians(fov_deg) / 2)
        return cls(f, f, width / 2, height / 2, width, height,
                   np.diag([1.0, -1.0, -1.0]), np.asarray(position, dtype=np.float64))

    def to_json(self):
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height,
                "R": [float(x) for x in self.R.ravel()], "p": [float(x) for x in self.p]}

    @classmethod
    def from_json(cls, d):
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   int(d["width"]), int(d["height"]), np.reshape(d["R"], (3, 3)), np.asarray(d["p"]))

    def rays(self, px, py):
        """Camera-frame points at unit depth through pixel coordinates."""
        px = np.asarray(px, dtype=np.float64)
        py = np.asarray(py, dtype=np.float64)
        return np.stack([(px - self.cx) / self.fx, (py - self.cy) / self.fy, np.ones_like(px)], axis=-1)


@dataclass(frozen=True)
class DepthImage:
    """Per-pixel depth; zero marks an invalid pixel."""

    depth: np.ndarray

    def __post_init__(self):
        d = np.array(self.depth, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError(f"depth image must be 2-D, got shape {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("depth values must be finite and non-negative")
        d.flags.writeable = False
        object.__setattr__(self, "depth", d)

    @property
    def mask(self):
        return self.depth > 0

    @property
    def shape(self):
        return self.depth.shape

    def n_valid(self):
        return int(np.count_nonzero(self.depth))

    @classmethod
    def from_points(cls, shape, rows, cols, depths):
        d = np.zeros(shape)
        d[np.asarray(rows), np.asarray(cols)] = depths
        return cls(d)


def back_project(camera, px, py, depth):
    return camera.rays(px, py) * np.asarray(depth, dtype=np.float64)[..., None]


def grid_faces(rows, cols):
    """Two triangles per lattice cell, all split along the same diagonal."""
    r, c = np.meshgrid(np.arange(rows - 1), np.arange(cols - 1), indexing="ij")
    i00 = (r * cols + c).ravel()
    i01, i10, i11 = i00 + 1, i00 + cols, i00 + cols + 1
    return np.concatenate([np.stack([i00, i01, i11], 1), np.stack([i00, i11, i10], 1)])


def make_grid_mesh(rows, cols, camera, depth):
    """Regular ``rows x cols`` lattice over the whole image, back-projected to ``depth``."""
    if rows < 2 or cols < 2:
        raise ValueError(f"grid needs at least 2x2 vertices, got {rows}x{cols}")
    if depth <= 0:
        raise ValueError("nominal depth must be positive")
    py, px = np.meshgrid(np.linspace(0, camera.height, rows), np.linspace(0, camera.width, cols), indexing="ij")
    verts = back_project(camera, px.ravel(), py.ravel(), np.full(rows * cols, float(depth)))
    return TriangleMesh(verts, grid_faces(rows, cols))


def _lattice(size, stride):
    idx = np.arange(0, size, stride)
    if idx[-1] != size - 1:
        idx = np.append(idx, size - 1)
    return idx


def pseudo_gt_mesh(dense, camera, stride=1):
    """Lift sampled pixel centres of a dense depth image into a grid-triangulated mesh."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    d = dense.depth
    rows, cols = _lattice(d.shape[0], stride), _lattice(d.shape[1], stride)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    z = d[rr, cc]
    if np.any(z <= 0):
        r, c = np.argwhere(z <= 0)[0]
        raise ValueError(f"invalid depth at lattice pixel (row={rows[r]}, col={cols[c]})")
    verts = back_project(camera, cc.ravel() + 0.5, rr.ravel() + 0.5, z.ravel())
    return TriangleMesh(verts, grid_faces(len(rows), len(cols)))


def to_world(mesh, camera):
    return mesh.with_vertices(mesh.vertices @ camera.R.T + camera.p)


def to_camera(mesh, camera):
    return mesh.with_vertices((mesh.vertices - camera.p) @ camera.R)


@dataclass(frozen=True)
class Projection:
    uv: np.ndarray        # normalised to [0, 1] by image size, unclamped
    pixels: np.ndarray    # pixel coordinates
    in_front: np.ndarray  # camera-frame depth > 0
    in_frame: np.ndarray  # in front and 0 <= uv <= 1

    def clamped_uv(self):
        return np.clip(self.uv, 0.0, 1.0)


def project_vertices(vertices, camera):
    v = vertices.vertices if isinstance(vertices, TriangleMesh) else np.asarray(vertices, dtype=np.float64)
    z = v[:, 2]
    in_front = z > 0
    safe = np.where(in_front, z, np.nan)
    pix = np.stack([camera.fx * v[:, 0] / safe + camera.cx, camera.fy * v[:, 1] / safe + camera.cy], axis=1)
    uv = pix / np.array([camera.width, camera.height])
    in_frame = in_front & np.all((uv >= 0) & (uv <= 1), axis=1)
    return Projection(uv, pix, in_front, in_frame)
