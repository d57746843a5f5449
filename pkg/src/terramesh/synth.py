"""Synthetic aerial terrain scenes: height fields with boxy buildings seen by nadir sweeps.

World frame is z-up with the ground near z = 0; cameras look straight down.
"""
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .geometry import Camera, DepthImage, TriangleMesh, grid_faces, to_camera
from .render import render_depth

DATASET_VERSION = 1
LIGHT = np.array([0.4, 0.3, 1.0]) / np.linalg.norm([0.4, 0.3, 1.0])
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class TerrainSpec:
    extent: float = 220.0                 # side of the square terrain (m), centred on the origin
    n_bumps: int = 10
    bump_height: tuple = (1.0, 8.0)
    bump_sigma: tuple = (10.0, 40.0)
    n_buildings: int = 18
    building_height: tuple = (4.0, 25.0)
    building_size: tuple = (8.0, 30.0)
    seed: int = 0

    def __post_init__(self):
        if self.extent <= 0 or self.n_bumps < 0 or self.n_buildings < 0:
            raise ValueError("invalid terrain spec")
        if min(self.bump_height) < 0 or min(self.building_height) < 0:
            raise ValueError("terrain heights must be non-negative")


@dataclass(frozen=True)
class Terrain:
    spec: TerrainSpec
    bumps: np.ndarray        # (k, 4): cx, cy, amplitude, sigma
    boxes: np.ndarray        # (m, 5): cx, cy, half-x, half-y, height above ground
    roof_colors: np.ndarray  # (m, 3)
    texture: np.ndarray      # (j, 4): fx, fy, phase, amplitude for the ground pattern

    def ground(self, x, y):
        h = np.zeros(np.broadcast(x, y).shape)
        for cx, cy, a, s in self.bumps:
            h += a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
        return h

    def _roofs(self, x, y):
        """Roof height and building index (-1 for ground) at each point."""
        top = np.full(np.broadcast(x, y).shape, -np.inf)
        which = np.full(top.shape, -1)
        for i, (cx, cy, hx, hy, hb) in enumerate(self.boxes):
            inside = (np.abs(x - cx) <= hx) & (np.abs(y - cy) <= hy)
            level = float(self.ground(cx, cy)) + hb
            hit = inside & (level > top)
            top = np.where(hit, level, top)
            which = np.where(hit, i, which)
        return top, which

    def height(self, x, y):
        g = self.ground(x, y)
        top, _ = self._roofs(x, y)
        return np.maximum(g, top)

    def albedo(self, x, y):
        g = self.ground(x, y)
        top, which = self._roofs(x, y)
        t = np.zeros(g.shape)
        for fx, fy, ph, a in self.texture:
            t += a * np.sin(fx * x + fy * y + ph)
        base = np.stack([0.35 + 0.25 * t, 0.45 + 0.2 * t, 0.25 + 0.1 * t], axis=-1)
        roof = (top >= g) & (which >= 0)
        if not len(self.roof_colors):
            return np.clip(base, 0.0, 1.0)
        colors = self.roof_colors[np.maximum(which, 0)]
        return np.clip(np.where(roof[..., None], colors, base), 0.0, 1.0)


def generate_terrain(spec):
    rng = np.random.default_rng(spec.seed)
    half = spec.extent / 2
    bumps = np.c_[rng.uniform(-half, half, (spec.n_bumps, 2)), rng.uniform(*spec.bump_height, spec.n_bumps),
                  rng.uniform(*spec.bump_sigma, spec.n_bumps)]
    size = rng.uniform(*spec.building_size, (spec.n_buildings, 2)) / 2
    centre = rng.uniform(-half, half, (spec.n_buildings, 2))
    centre = np.clip(centre, -half + size, half - size)  # keep footprints inside the extent
    boxes = np.c_[centre, size, rng.uniform(*spec.building_height, spec.n_buildings)]
    roof = rng.uniform(0.45, 0.95, (spec.n_buildings, 3)) * rng.choice([0.6, 1.0], (spec.n_buildings, 1))
    tex = np.c_[rng.uniform(-0.6, 0.6, (6, 2)), rng.uniform(0, 2 * np.pi, 6), rng.uniform(0.1, 0.35, 6)]
    return Terrain(spec, bumps.reshape(-1, 4), boxes.reshape(-1, 5), roof.reshape(-1, 3), tex)


@dataclass(frozen=True)
class TrajectorySpec:
    rows: int = 1
    per_row: int = 2
    altitude: float = 100.0
    row_overlap: float = 0.75
    col_overlap: float = 0.80
    fov_deg: float = 60.0
    resolution: int = 128

    def footprint(self):
        """Ground side length (m) seen at elevation 0."""
        return 2 * self.altitude * np.tan(np.radians(self.fov_deg) / 2)


def generate_trajectory(terrain, tspec):
    """Nadir cameras on a rows x per_row grid centred over the terrain."""
    for name in ("row_overlap", "col_overlap"):
        if not 0 < getattr(tspec, name) < 1:
            raise ValueError(f"{name} must lie in (0, 1), got {getattr(tspec, name)}")
    if tspec.rows < 1 or tspec.per_row < 1:
        raise ValueError("trajectory needs at least one row and one keyframe per row")
    w = tspec.footprint()
    dx, dy = (1 - tspec.col_overlap) * w, (1 - tspec.row_overlap) * w
    span_x, span_y = (tspec.per_row - 1) * dx + w, (tspec.rows - 1) * dy + w
    if max(span_x, span_y) > terrain.spec.extent:
        raise ValueError(f"sweep covers {span_x:.1f} x {span_y:.1f} m (footprint {w:.1f} m) "
                         f"but the terrain is only {terrain.spec.extent:.1f} m wide")
    xs = (np.arange(tspec.per_row) - (tspec.per_row - 1) / 2) * dx
    ys = (np.arange(tspec.rows) - (tspec.rows - 1) / 2) * dy
    return [Camera.nadir(tspec.resolution, tspec.resolution, tspec.fov_deg, (x, y, tspec.altitude))
            for y in ys for x in xs]


def heightfield_mesh(terrain, x0, x1, y0, y1, spacing):
    nx = int(np.ceil((x1 - x0) / spacing)) + 1
    ny = int(np.ceil((y1 - y0) / spacing)) + 1
    yy, xx = np.meshgrid(np.linspace(y0, y1, ny), np.linspace(x0, x1, nx), indexing="ij")
    return TriangleMesh(np.c_[xx.ravel(), yy.ravel(), terrain.height(xx, yy).ravel()], grid_faces(ny, nx))


def render_scene(terrain, camera, oversample=2):
    """RGB in [0, 1] (8-bit quantised) and dense depth (float32-representable)."""
    alt = camera.p[2]
    half_w = 0.5 * camera.width / camera.fx * alt
    half_h = 0.5 * camera.height / camera.fy * alt
    margin = 2 * half_w / camera.width * 2
    x0, x1 = camera.p[0] - half_w - margin, camera.p[0] + half_w + margin
    y0, y1 = camera.p[1] - half_h - margin, camera.p[1] + half_h + margin
    spacing = (2 * half_w / camera.width) / oversample
    world = heightfield_mesh(terrain, x0, x1, y0, y1, spacing)
    if world.vertices[:, 2].max() >= alt - 1e-6:
        raise ValueError(f"camera at altitude {alt} is not above the terrain (max {world.vertices[:, 2].max():.2f})")
    rd = render_depth(to_camera(world, camera), camera)
    if not rd.mask.all():
        raise ValueError("terrain does not cover the whole view")
    depth = rd.depth.astype(np.float32).astype(np.float64)

    r, c = np.mgrid[0:camera.height, 0:camera.width]
    pts = camera.rays(c + 0.5, r + 0.5) * depth[..., None]
    wpts = pts @ camera.R.T + camera.p
    x, y = wpts[..., 0], wpts[..., 1]
    eps = 0.25 * spacing
    hx = (terrain.height(x + eps, y) - terrain.height(x - eps, y)) / (2 * eps)
    hy = (terrain.height(x, y + eps) - terrain.height(x, y - eps)) / (2 * eps)
    n = np.stack([-hx, -hy, np.ones_like(hx)], axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    shade = 0.35 + 0.65 * np.clip(n @ LIGHT, 0, 1)
    rgb = np.clip(terrain.albedo(x, y) * shade[..., None], 0, 1)
    return np.round(rgb * 255) / 255, DepthImage(depth)


def image_gradient(rgb):
    gray = np.asarray(rgb) @ np.array([0.299, 0.587, 0.114])
    gy, gx = np.gradient(gray)
    return np.hypot(gx, gy)


def sample_sparse_depth(dense, rgb, count, noise=False, seed=0, sigma=0.01, keypoint_fraction=0.7):
    """Keypoint-biased sparse depth; the pixel pattern does not depend on ``noise``."""
    valid = np.flatnonzero(dense.mask.ravel())
    count = int(count)
    if count > len(valid):
        raise ValueError(f"asked for {count} measurements but only {len(valid)} valid pixels")
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    grad = image_gradient(rgb).ravel()[valid]
    strong = valid[grad > np.percentile(grad, 75)]
    n_key = min(int(round(keypoint_fraction * count)), len(strong))
    picked = rng.choice(strong, n_key, replace=False)
    rest = np.setdiff1d(valid, picked, assume_unique=True)
    picked = np.sort(np.r_[picked, rng.choice(rest, count - n_key, replace=False)])
    noise_draw = rng.normal(size=count)
    depth = dense.depth.ravel()[picked]
    if noise:
        depth = depth * (1 + sigma * noise_draw)
    out = np.zeros(dense.depth.size)
    out[picked] = depth
    return DepthImage(out.reshape(dense.depth.shape))


@dataclass
class Scene:
    scene_id: str
    rgb: np.ndarray
    sparse: DepthImage
    gt: DepthImage
    camera: Camera


@dataclass(frozen=True)
class DatasetConfig:
    n_sequences: int = 20
    split_counts: tuple = (14, 2, 4)
    sparsity_levels: tuple = (500, 1000, 2000)
    noise_sigma: float = 0.01
    seed: int = 0
    terrain: TerrainSpec = field(default_factory=TerrainSpec)
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)

    def __post_init__(self):
        if sum(self.split_counts) != self.n_sequences or len(self.split_counts) != 3:
            raise ValueError(f"split counts {self.split_counts} must sum to {self.n_sequences}")

    def to_json(self):
        return json.loads(json.dumps(asdict(self)))

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        d["terrain"] = TerrainSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in d["terrain"].items()})
        d["trajectory"] = TrajectorySpec(**d["trajectory"])
        d["split_counts"] = tuple(d["split_counts"])
        d["sparsity_levels"] = tuple(d["sparsity_levels"])
        return cls(**d)


def _seed(*parts):
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def variant_dir(level, noise):
    return f"s{int(level)}_{'noisy' if noise else 'clean'}"


def write_sparse_json(path, sparse):
    rows, cols = np.nonzero(sparse.mask)
    pts = [{"u": int(c), "v": int(r), "depth": float(sparse.depth[r, c])} for r, c in zip(rows, cols)]
    Path(path).write_text(json.dumps({"width": sparse.shape[1], "height": sparse.shape[0], "points": pts}))


def read_sparse_json(path):
    d = json.loads(Path(path).read_text())
    pts = d["points"]
    return DepthImage.from_points((d["height"], d["width"]), [p["v"] for p in pts], [p["u"] for p in pts],
                                  [p["depth"] for p in pts])


def build_dataset(root, config=DatasetConfig()):
    """Write every keyframe and sparse variant under ``root`` plus the dataset.json manifest."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    splits = np.repeat(SPLITS, config.split_counts)
    sequences = []
    for s in range(config.n_sequences):
        seq_id = f"seq{s:02d}"
        seq_seed = _seed(config.seed, s)
        terrain = generate_terrain(TerrainSpec(**{**asdict(config.terrain), "seed": seq_seed}))
        keyframes = []
        for k, cam in enumerate(generate_trajectory(terrain, config.trajectory)):
            kf_id = f"{seq_id}/kf{k:02d}"
            d = root / kf_id
            d.mkdir(parents=True, exist_ok=True)
            rgb, gt = render_scene(terrain, cam)
            io.write_ppm(d / "rgb.ppm", rgb)
            io.write_pfm(d / "gt_depth.pfm", gt.depth)
            io.write_camera(d / "camera.json", cam)
            for level in config.sparsity_levels:
                for noise in (False, True):
                    sparse = sample_sparse_depth(gt, rgb, level, noise, _seed(seq_seed, k, level),
                                                 config.noise_sigma)
                    (d / variant_dir(level, noise)).mkdir(exist_ok=True)
                    write_sparse_json(d / variant_dir(level, noise) / "sparse_depth.json", sparse)
            keyframes.append(kf_id)
        sequences.append({"id": seq_id, "split": str(splits[s]), "seed": seq_seed, "keyframes": keyframes})
    manifest = {"version": DATASET_VERSION, "config": config.to_json(), "sequences": sequences}
    (root / "dataset.json").write_text(json.dumps(manifest, indent=1))
    return manifest


def load_manifest(root):
    path = Path(root) / "dataset.json"
    if not path.exists():
        raise FileNotFoundError(f"no dataset manifest at {path}")
    return json.loads(path.read_text())


def keyframes(manifest, split):
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    return [kf for seq in manifest["sequences"] if seq["split"] == split for kf in seq["keyframes"]]


def load_scene(root, kf_id, level=1000, noise=False):
    d = Path(root) / kf_id
    sparse_path = d / variant_dir(level, noise) / "sparse_depth.json"
    for p in (d / "rgb.ppm", d / "gt_depth.pfm", d / "camera.json", sparse_path):
        if not p.exists():
            raise FileNotFoundError(f"missing scene file {p}")
    return Scene(f"{kf_id}/{variant_dir(level, noise)}", io.read_ppm(d / "rgb.ppm"), read_sparse_json(sparse_path),
                 DepthImage(io.read_pfm(d / "gt_depth.pfm")), io.read_camera(d / "camera.json"))
