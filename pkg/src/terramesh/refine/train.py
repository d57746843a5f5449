"""Training loop for the refinement cascade (Adam, one scene per step)."""
import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tape
from ..geometry import pseudo_gt_mesh
from ..losses import REFINE_WEIGHTS, LossWeights, MeshObjective, SurfaceSampler, chamfer, sample_mesh_surface
from ..metrics import eval_l2_metric, eval_l3_metric, eval_sampler
from ..optim import AdamState, adam_step
from .model import RefineModel, StageNotFinite, leaves_for

log = logging.getLogger(__name__)


class TrainingDivergedError(FloatingPointError):
    def __init__(self, scene_id, stage, value):
        super().__init__(f"non-finite training loss {value} on scene {scene_id!r}, stage {stage}")
        self.scene_id = scene_id
        self.stage = stage


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 5e-4
    weights: LossWeights = field(default_factory=lambda: REFINE_WEIGHTS)
    variant: str = "rgb_rd_edt"
    seed: int = 0
    n_samples: int = 10000
    pgt_stride: int = 1

    def __post_init__(self):
        if self.epochs < 0 or not self.learning_rate > 0 or self.n_samples < 1 or self.pgt_stride < 1:
            raise ValueError("invalid training configuration")


class Trainer:
    def __init__(self, config, model=None):
        self.config = config
        self.model = model or RefineModel.create(config.variant, config.seed)
        self.state = AdamState.for_params(list(self.model.params.values()))
        self.step_count = 0
        self._objectives = {}

    def objective(self, item):
        obj = self._objectives.get(item.scene_id)
        if obj is None:
            c = self.config
            pgt = pseudo_gt_mesh(item.gt, item.camera, c.pgt_stride)
            obj = MeshObjective(item.init_mesh.faces, item.camera, c.weights, target=item.gt, pseudo_gt=pgt,
                                sampler=SurfaceSampler(c.n_samples, c.seed), scene_id=item.scene_id)
            if obj.q is None:  # keep the cloud for logging even when l3 carries no weight
                obj.q = sample_mesh_surface(pgt.vertices, pgt.faces, obj.sampler)
            self._objectives[item.scene_id] = obj
        return obj

    def step(self, item):
        """One Adam update on ``item``; returns the final-stage (l2, l3) before the update."""
        obj = self.objective(item)
        tape = Tape()
        leaves = leaves_for(tape, self.model.params)
        try:
            stages = self.model.forward(item, tape, leaves)
        except StageNotFinite as e:
            raise TrainingDivergedError(item.scene_id, e.stage, float("nan")) from e
        total = None
        for s, verts in enumerate(stages, start=1):
            loss, terms = obj(verts, step=self.step_count * len(stages) + s)
            value = float(loss.value)
            if not math.isfinite(value):
                raise TrainingDivergedError(item.scene_id, s, value)
            total = loss if total is None else total + loss
        last = stages[-1].value
        l2 = terms.get("l2")
        if l2 is None:
            l2 = eval_l2_metric(item.init_mesh.with_vertices(last), item.gt, item.camera)
        l3 = terms.get("l3")
        if l3 is None:
            sampler = obj.sampler.for_step(item.scene_id, self.step_count)
            l3 = chamfer(sample_mesh_surface(last, obj.faces, sampler), obj.q)
        ad.backward(total)
        adam_step(list(leaves.values()), self.state, self.config.learning_rate)
        self.step_count += 1
        return float(total.value), l2, l3

    def evaluate(self, items):
        l2, l3 = [], []
        for item in items:
            mesh = self.model.refine(item)[-1]
            l2.append(eval_l2_metric(mesh, item.gt, item.camera))
            l3.append(eval_l3_metric(mesh, item.gt, item.camera, eval_sampler(self.config.n_samples),
                                     self.config.pgt_stride))
        return float(np.mean(l2)), float(np.mean(l3))


def train(train_items, val_items=(), config=TrainConfig(), model=None, metrics_path=None, checkpoint_path=None):
    """Train the cascade; returns (model, history rows (epoch, split, l2, l3), per-step losses)."""
    if not train_items:
        raise ValueError("training split is empty")
    trainer = Trainer(config, model)
    history, losses = [], []
    writer = None
    fh = open(metrics_path, "w", newline="") if metrics_path else None
    try:
        if fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "split", "l2", "l3"])
        for epoch in range(config.epochs):
            order = np.random.default_rng([config.seed, epoch]).permutation(len(train_items))
            stats = [trainer.step(train_items[i]) for i in order]
            losses.extend(s[0] for s in stats)
            rows = [(epoch, "train", float(np.mean([s[1] for s in stats])), float(np.mean([s[2] for s in stats])))]
            if val_items:
                rows.append((epoch, "val", *trainer.evaluate(val_items)))
            for row in rows:
                history.append(row)
                if writer:
                    writer.writerow([row[0], row[1], repr(row[2]), repr(row[3])])
            if fh:
                fh.flush()
            log.info("epoch %d: %s", epoch, ", ".join(f"{r[1]} l2={r[2]:.4f} l3={r[3]:.4f}" for r in rows))
            if checkpoint_path:
                trainer.model.save(checkpoint_path)
    finally:
        if fh:
            fh.close()
    if checkpoint_path and config.epochs == 0:
        trainer.model.save(checkpoint_path)
    return trainer.model, history, losses
