"""Three-stage refinement cascade: render, encode, align, graph-convolve, offset."""
import json
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Tape
from ..geometry import DepthImage, TriangleMesh
from ..render import render_depth_diff
from .align import align_features
from .encoder import CHANNELS, VARIANTS, encoder_input, extract_features, init_encoder
from .gcn import gcn_forward, init_gcn, normalized_adjacency
from .edt import edt

CHECKPOINT_VERSION = 1
N_STAGES = 3


@dataclass
class RefineInput:
    """One keyframe as seen by the network."""
    scene_id: str
    rgb: np.ndarray
    sparse: DepthImage
    camera: object
    init_mesh: TriangleMesh
    gt: DepthImage = None
    _edt: np.ndarray = field(default=None, repr=False)

    @property
    def nominal_depth(self):
        return float(np.median(self.sparse.depth[self.sparse.mask]))

    @property
    def edt_image(self):
        if self._edt is None:
            self._edt = edt(self.sparse)
        return self._edt


class StageNotFinite(FloatingPointError):
    def __init__(self, stage):
        super().__init__(f"stage {stage} produced non-finite vertices")
        self.stage = stage


class RefineModel:
    def __init__(self, params, variant="rgb_rd_edt", n_stages=N_STAGES):
        if variant not in VARIANTS:
            raise ValueError(f"unknown input variant {variant!r}")
        self.params = params
        self.variant = variant
        self.n_stages = n_stages

    @classmethod
    def create(cls, variant="rgb_rd_edt", seed=0, n_stages=N_STAGES, channels=CHANNELS):
        rng = np.random.default_rng(seed)
        params = init_encoder(rng, VARIANTS[variant], channels)
        for s in range(1, n_stages + 1):
            params.update(init_gcn(rng, sum(channels) + 3, prefix=f"gcn{s}"))
        return cls(params, variant, n_stages)

    def n_parameters(self):
        return sum(p.size for p in self.params.values())

    def save(self, path):
        meta = {"version": CHECKPOINT_VERSION, "variant": self.variant, "n_stages": self.n_stages,
                "shapes": {k: list(v.shape) for k, v in self.params.items()}}
        with open(path, "wb") as fh:
            np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **self.params)

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["__meta__"]))
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"{path}: checkpoint version {meta.get('version')} != {CHECKPOINT_VERSION}")
            params = {k: z[k].astype(np.float64) for k in meta["shapes"]}
        return cls(params, meta["variant"], meta["n_stages"])

    def forward(self, item, tape=None, leaves=None):
        """Run the cascade; returns the per-stage vertex Vars (camera frame).

        ``leaves`` maps parameter names to tape leaves when gradients are wanted.
        """
        tape = tape or Tape()
        params = leaves if leaves is not None else {k: tape.constant(v) for k, v in self.params.items()}
        mesh = item.init_mesh
        adjacency = normalized_adjacency(mesh.edges, mesh.n_vertices)
        verts = tape.constant(mesh.vertices.copy())
        stages = []
        for s in range(1, self.n_stages + 1):
            rendered = render_depth_diff(verts, mesh, item.camera).depth
            x = encoder_input(item.rgb, rendered, item.edt_image if self.variant == "rgb_rd_edt" else None,
                              item.nominal_depth, self.variant)
            pyramid = extract_features(x, params)
            feats = align_features(verts, item.camera, pyramid)
            verts = verts + gcn_forward(feats, adjacency, params, prefix=f"gcn{s}")
            if not np.all(np.isfinite(verts.value)):
                raise StageNotFinite(s)
            stages.append(verts)
        return stages

    def refine(self, item):
        """Refined meshes M1..M3 as plain TriangleMesh values."""
        return [item.init_mesh.with_vertices(v.value) for v in self.forward(item)]


def refine_cascade(init_mesh, rgb, sparse, camera, model):
    return model.refine(RefineInput("scene", rgb, sparse, camera, init_mesh))


def leaves_for(tape, params):
    return {k: tape.leaf(v) for k, v in params.items()}

