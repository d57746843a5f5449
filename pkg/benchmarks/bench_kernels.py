"""Time the numba and pure-numpy kernels on representative inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Both implementations are called directly, so the TERRAMESH_BACKEND flag does
not matter here. ``--end-to-end`` additionally times one refinement training
step in a fresh interpreter under each backend setting.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from terramesh.geometry import Camera, make_grid_mesh, pseudo_gt_mesh
from terramesh.kernels import edt as edt_k
from terramesh.kernels import nn as nn_k
from terramesh.kernels import raster as raster_k
from terramesh.losses import SurfaceSampler, sample_mesh_surface
from terramesh.render import _project
from terramesh.synth import TerrainSpec, TrajectorySpec, generate_terrain, generate_trajectory, render_scene


def cases():
    terrain = generate_terrain(TerrainSpec(seed=1))
    cam = generate_trajectory(terrain, TrajectorySpec())[0]
    _, gt = render_scene(terrain, cam)
    pgt = pseudo_gt_mesh(gt, cam)
    q = sample_mesh_surface(pgt.vertices, pgt.faces, SurfaceSampler(10000, 0))
    mesh = make_grid_mesh(16, 16, cam, 100.0)
    p = sample_mesh_surface(mesh.vertices, mesh.faces, SurfaceSampler(10000, 1))
    px, py, z = _project(pgt.vertices, cam)
    mask = np.zeros((512, 512), bool)
    mask.flat[np.random.default_rng(0).choice(512 * 512, 2000, replace=False)] = True
    return {
        "rasterize 128x128, 32k faces": (raster_k.rasterize_numba, raster_k.rasterize_numpy,
                                         (px, py, z, pgt.faces, cam.height, cam.width)),
        "nearest neighbours 10k x 10k": (nn_k.nearest_neighbors_numba, nn_k.nearest_neighbors_numpy, (p, q)),
        "squared EDT 512x512": (edt_k.edt_sq_numba, edt_k.edt_sq_numpy, (mask,)),
    }


def same(a, b):
    a, b = (a, b) if isinstance(a, tuple) else ((a,), (b,))
    return all(np.array_equal(x, y) for x, y in zip(a, b))


STEP = """
import time
from terramesh.synth import *
from terramesh.init_mesh import InitConfig, run_initialization
from terramesh.refine import RefineInput, TrainConfig, Trainer
t = generate_terrain(TerrainSpec(seed=3)); cam = generate_trajectory(t, TrajectorySpec())[0]
rgb, gt = render_scene(t, cam); sp = sample_sparse_depth(gt, rgb, 1000, seed=1)
item = RefineInput("b", rgb, sp, cam, run_initialization(sp, cam, InitConfig(16, 16)).mesh, gt)
tr = Trainer(TrainConfig()); tr.step(item)
t0 = time.perf_counter(); [tr.step(item) for _ in range(5)]; print((time.perf_counter() - t0) / 5)
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()

    print(f"{'kernel':<32}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>10}  equal")
    for name, (fast, slow, inputs) in cases().items():
        fast(*inputs)  # compile outside the timing
        tf = min(timeit.repeat(lambda: fast(*inputs), number=1, repeat=args.repeat))
        ts = min(timeit.repeat(lambda: slow(*inputs), number=1, repeat=max(1, args.repeat // 2)))
        print(f"{name:<32}{tf:>12.4f}{ts:>12.4f}{ts / tf:>9.1f}x  {same(fast(*inputs), slow(*inputs))}")

    if args.end_to_end:
        for backend in ("numba", "numpy"):
            out = subprocess.run([sys.executable, "-c", STEP], capture_output=True, text=True, check=True,
                                 env={**os.environ, "TERRAMESH_BACKEND": backend})
            print(f"training step, {backend} backend: {float(out.stdout.strip()):.3f} s")


if __name__ == "__main__":
    main()
