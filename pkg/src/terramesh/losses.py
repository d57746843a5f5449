"""Depth, Chamfer and regularization losses over mesh vertices."""
import zlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tape, Var
from .geometry import TriangleMesh, edges_from_faces
from .kernels import nearest_neighbors
from .render import render_depth_diff


@dataclass(frozen=True)
class LossWeights:
    w2: float = 1.0
    w3: float = 0.0
    wV: float = 0.5
    wE: float = 0.0

    def __post_init__(self):
        vals = (self.w2, self.w3, self.wV, self.wE)
        if any(not np.isfinite(w) or w < 0 for w in vals):
            raise ValueError(f"loss weights must be finite and >= 0, got {vals}")
        if not any(vals):
            raise ValueError("at least one loss weight must be positive")

    @classmethod
    def from_list(cls, ws):
        if len(ws) != 4:
            raise ValueError(f"expected 4 weights [w2, w3, wV, wE], got {list(ws)}")
        return cls(*map(float, ws))

    def as_list(self):
        return [self.w2, self.w3, self.wV, self.wE]


INIT_WEIGHTS = LossWeights(1.0, 0.0, 0.5, 0.0)
REFINE_WEIGHTS = LossWeights(3.0, 1.0, 0.5, 0.01)


def step_seed(scene_id, step):
    """Seed for the surface sample drawn at ``step`` of scene ``scene_id``."""
    key = zlib.crc32(str(scene_id).encode())
    return int(np.random.SeedSequence([key, int(step)]).generate_state(1)[0])


@dataclass(frozen=True)
class SurfaceSampler:
    n_samples: int = 10000
    seed: int = 0

    def __post_init__(self):
        if int(self.n_samples) < 1:
            raise ValueError(f"sample count must be >= 1, got {self.n_samples}")

    def for_step(self, scene_id, step):
        return SurfaceSampler(self.n_samples, step_seed(scene_id, step))

    def matrix(self, vertices, faces):
        """Sparse (S, n) matrix whose rows are the barycentric weights of each sample."""
        faces = np.asarray(faces, dtype=np.int64)
        v = np.asarray(vertices, dtype=np.float64)
        if len(faces) == 0:
            raise ValueError("cannot sample a mesh without faces")
        a = v[faces]
        area = 0.5 * np.linalg.norm(np.cross(a[:, 1] - a[:, 0], a[:, 2] - a[:, 0]), axis=1)
        total = area.sum()
        if not total > 0:
            raise ValueError("all faces are degenerate (zero area)")
        rng = np.random.default_rng(self.seed)
        s = int(self.n_samples)
        face = rng.choice(len(faces), size=s, p=area / total)
        r1, r2 = rng.random(s), rng.random(s)
        sq = np.sqrt(r1)
        w = np.stack([1 - sq, sq * (1 - r2), sq * r2], axis=1)
        rows = np.repeat(np.arange(s), 3)
        return sp.csr_matrix((w.ravel(), (rows, faces[face].ravel())), shape=(s, len(v)))


def _as_var(x):
    return x if isinstance(x, Var) else Tape().constant(np.asarray(x, dtype=np.float64))


def _value(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def sample_mesh_surface(vertices, faces, sampler):
    """Uniform surface samples; a Var in gives a Var out (gradients reach the vertices)."""
    b = sampler.matrix(_value(vertices), faces)
    if isinstance(vertices, Var):
        return ad.spmm(b, vertices)
    return np.asarray(b @ _value(vertices))


def _directed(p, q):
    """Mean distance from each point of ``p`` to its nearest point of ``q``."""
    idx, _ = nearest_neighbors(_value(p), _value(q))
    tape = p.tape if isinstance(p, Var) else q.tape
    p = p if isinstance(p, Var) else tape.constant(_value(p))
    q = q if isinstance(q, Var) else tape.constant(_value(q))
    return ad.mean(ad.norm_rows(p - ad.gather(q, idx)))


def chamfer_var(p, q):
    """Symmetric Chamfer distance on the tape; nearest-neighbour indices are constants."""
    if not isinstance(p, Var) and not isinstance(q, Var):
        p = _as_var(p)
    return ad.scale(_directed(p, q) + _directed(q, p), 0.5)


def chamfer_directed(p, q):
    p, q = _value(p), _value(q)
    _, d2 = nearest_neighbors(p, q)
    return float(np.sqrt(d2).mean())


def chamfer(p, q):
    return 0.5 * chamfer_directed(p, q) + 0.5 * chamfer_directed(q, p)


def loss_2d(rendered, target):
    """Mean absolute depth error over pixels valid in both images."""
    tmask = target.mask
    if rendered.mask.shape != tmask.shape:
        raise ValueError(f"image sizes differ: {rendered.mask.shape} vs {tmask.shape}")
    both = np.flatnonzero(rendered.mask & tmask)
    if len(both) == 0:
        raise ValueError("rendered and target depth share no valid pixel")
    ref = target.depth.ravel()[both]
    d = _as_var(rendered.depth)
    return ad.mean(ad.absolute(ad.gather(ad.reshape(d, (-1,)), both) - ref))


def loss_3d(vertices, faces, target, sampler):
    """Chamfer between samples of the live mesh and ``target``.

    ``target`` is a TriangleMesh (sampled with ``sampler``) or a fixed (S, 3) cloud.
    """
    if isinstance(target, TriangleMesh):
        target = sample_mesh_surface(target.vertices, target.faces, sampler)
    return chamfer_var(sample_mesh_surface(_as_var(vertices), faces, sampler), target)


def laplacian_operator(edges, n_vertices):
    """Sparse I - G^-1 A; row i maps vertices to v_i minus the mean of its neighbours."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    a = sp.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                      shape=(n_vertices, n_vertices)).tocsr()
    a.data[:] = 1.0
    deg = np.asarray(a.sum(axis=1)).ravel()
    if np.any(deg == 0):
        raise ValueError(f"isolated vertex {int(np.flatnonzero(deg == 0)[0])} has no neighbours")
    return (sp.identity(n_vertices, format="csr") - sp.diags(1.0 / deg) @ a).tocsr()


def loss_laplacian(vertices, edges, operator=None):
    v = _as_var(vertices)
    op = laplacian_operator(edges, v.value.shape[0]) if operator is None else operator
    return ad.mean(ad.norm_rows(ad.spmm(op, v)))


def loss_edge(vertices, edges):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(e) == 0:
        raise ValueError("mesh has no edges")
    v = _as_var(vertices)
    return ad.mean(ad.norm_rows(ad.gather(v, e[:, 0]) - ad.gather(v, e[:, 1])))


class MeshObjective:
    """Weighted loss for one scene with its constant parts precomputed.

    The pseudo-ground-truth cloud is sampled once; the live mesh is resampled
    at every step with a seed derived from (scene_id, step).
    """

    def __init__(self, faces, camera, weights, target=None, pseudo_gt=None, sampler=None, scene_id=0):
        self.faces = np.asarray(faces, dtype=np.int64)
        self.edges = edges_from_faces(self.faces)
        self.camera = camera
        self.weights = weights
        self.target = target
        self.scene_id = scene_id
        self.sampler = sampler or SurfaceSampler()
        self._lap = None
        self.q = None
        if weights.w2 > 0 and target is None:
            raise ValueError("w2 > 0 needs a target depth image")
        if weights.w3 > 0:
            if pseudo_gt is None:
                raise ValueError("w3 > 0 needs a pseudo ground-truth mesh")
            self.q = sample_mesh_surface(pseudo_gt.vertices, pseudo_gt.faces, self.sampler)

    def laplacian(self, n):
        if self._lap is None or self._lap.shape[0] != n:
            self._lap = laplacian_operator(self.edges, n)
        return self._lap

    def __call__(self, vertices, step=0):
        """Total loss Var and a dict of the unweighted active terms (floats)."""
        w = self.weights
        v = _as_var(vertices)
        total, terms = None, {}

        def acc(name, weight, term):
            nonlocal total
            terms[name] = float(term.value)
            scaled = ad.scale(term, weight)
            total = scaled if total is None else total + scaled

        if w.w2 > 0:
            acc("l2", w.w2, loss_2d(render_depth_diff(v, self.faces, self.camera), self.target))
        if w.w3 > 0:
            p = sample_mesh_surface(v, self.faces, self.sampler.for_step(self.scene_id, step))
            acc("l3", w.w3, chamfer_var(p, self.q))
        if w.wV > 0:
            acc("lV", w.wV, loss_laplacian(v, self.edges, self.laplacian(v.value.shape[0])))
        if w.wE > 0:
            acc("lE", w.wE, loss_edge(v, self.edges))
        return total, terms


def loss_composite(vertices, faces, camera, weights, target=None, pseudo_gt=None, sampler=None,
                   step=0, scene_id=0):
    total, _ = MeshObjective(faces, camera, weights, target, pseudo_gt, sampler, scene_id)(vertices, step)
    return total
