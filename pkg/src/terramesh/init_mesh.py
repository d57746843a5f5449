"""Mesh initialization: lift a flat image-plane grid onto sparse depth by gradient descent.

Only the per-vertex depth along each grid vertex's camera ray is optimized, so
the vertices keep their pixel positions and the grid cannot fold.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape
from .geometry import make_grid_mesh
from .losses import INIT_WEIGHTS, LossWeights, MeshObjective
from .optim import AdamState, adam_step


class InitDivergedError(FloatingPointError):
    def __init__(self, iteration, value):
        super().__init__(f"non-finite initialization loss {value} at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class InitConfig:
    grid_rows: int = 32
    grid_cols: int = 32
    iterations: int = 150
    learning_rate: float = 0.5
    final_lr_fraction: float = 0.01
    weights: LossWeights = field(default_factory=lambda: INIT_WEIGHTS)
    nominal_depth: float = None   # None: median of the valid sparse depths

    def __post_init__(self):
        if int(self.iterations) < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.grid_rows < 2 or self.grid_cols < 2:
            raise ValueError("grid needs at least 2 rows and 2 columns")
        if not self.learning_rate > 0 or not 0 < self.final_lr_fraction <= 1:
            raise ValueError("learning rate must be > 0 and final_lr_fraction in (0, 1]")

    def lr_at(self, it):
        """Cosine decay from ``learning_rate`` to ``final_lr_fraction * learning_rate``."""
        lo = self.learning_rate * self.final_lr_fraction
        if self.iterations == 1:
            return self.learning_rate
        t = it / (self.iterations - 1)
        return lo + 0.5 * (self.learning_rate - lo) * (1 + math.cos(math.pi * t))


@dataclass
class InitResult:
    mesh: object
    trace: list          # objective after each update
    initial_loss: float  # objective at the starting flat grid


def _along_rays(tape, depth, rays):
    """Vertices rays * depth[:, None] on the tape."""
    return tape.record("ray_scale", rays * depth.value[:, None], (depth,),
                       lambda g: ((g * rays).sum(axis=1),))


def run_initialization(sparse, camera, config=InitConfig()):
    valid = sparse.depth[sparse.mask]
    if len(valid) < 3:
        raise ValueError(f"need at least 3 valid sparse depths, got {len(valid)}")
    start = float(np.median(valid)) if config.nominal_depth is None else float(config.nominal_depth)
    grid = make_grid_mesh(config.grid_rows, config.grid_cols, camera, start)
    rays = grid.vertices / grid.vertices[:, 2:]
    depth = np.full(grid.n_vertices, start)
    objective = MeshObjective(grid.faces, camera, config.weights, target=sparse)
    state = AdamState.for_params([depth])

    def forward(it):
        tape = Tape()
        d = tape.leaf(depth)
        loss, _ = objective(_along_rays(tape, d, rays))
        value = float(loss.value)
        if not math.isfinite(value):
            raise InitDivergedError(it, value)
        return tape, d, loss, value

    tape, d, loss, initial = forward(0)
    trace = []
    for it in range(config.iterations):
        tape.backward(loss)
        adam_step([d], state, config.lr_at(it))
        if np.any(depth <= 0):
            raise InitDivergedError(it, "(vertex depth crossed the camera plane)")
        tape, d, loss, value = forward(it + 1)
        trace.append(value)
    return InitResult(grid.with_vertices(rays * depth[:, None]), trace, initial)


def initialize_mesh(sparse, camera, config=InitConfig()):
    return run_initialization(sparse, camera, config).mesh


def init_loss_trace(sparse, camera, config=InitConfig()):
    return run_initialization(sparse, camera, config).trace
