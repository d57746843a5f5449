"""Depth and surface error metrics against dense ground truth."""
from .geometry import pseudo_gt_mesh
from .losses import SurfaceSampler, chamfer, loss_2d, sample_mesh_surface
from .render import render_depth

EVAL_SEED = 20240
EVAL_SAMPLES = 10000


def eval_sampler(n_samples=EVAL_SAMPLES):
    return SurfaceSampler(n_samples, EVAL_SEED)


def eval_l2_metric(mesh, gt, camera):
    """Mean absolute depth error of the rendered mesh over pixels valid in both."""
    return float(loss_2d(render_depth(mesh, camera), gt).value)


def eval_l3_metric(mesh, gt, camera, sampler=None, stride=1, gt_mesh=None):
    """Chamfer distance between surface samples of ``mesh`` and of the pseudo-GT mesh."""
    sampler = sampler or eval_sampler()
    gt_mesh = gt_mesh or pseudo_gt_mesh(gt, camera, stride)
    p = sample_mesh_surface(mesh.vertices, mesh.faces, sampler)
    q = sample_mesh_surface(gt_mesh.vertices, gt_mesh.faces, sampler)
    return chamfer(p, q)


def param_efficiency(n_vertices, height, width):
    """Scalars stored by a mesh relative to a depth image: 3n / (H W)."""
    if n_vertices <= 0:
        raise ValueError("mesh has no vertices")
    if height <= 0 or width <= 0:
        raise ValueError("depth resolution must be positive")
    return 3 * int(n_vertices) / (int(height) * int(width))

