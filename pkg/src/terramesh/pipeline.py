"""Run configuration and the per-stage helpers shared by the CLI and the benchmark."""
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .init_mesh import InitConfig, run_initialization
from .losses import INIT_WEIGHTS, REFINE_WEIGHTS, LossWeights
from .refine import VARIANTS, RefineInput, RefineModel, TrainConfig, train
from .synth import DatasetConfig, keyframes, load_manifest, load_scene

METHODS = ("SD-tri", "Initialized", "RGB", "RGB+RD", "RGB+RD+EDT")
METHOD_VARIANT = {"RGB": "rgb", "RGB+RD": "rgb_rd", "RGB+RD+EDT": "rgb_rd_edt"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    dataset: str = "data"
    checkpoints: str = "checkpoints"
    output: str = "out"
    methods: tuple = METHODS
    variants: tuple = ("rgb_rd_edt",)           # which inputs `train` fits
    init_weights: tuple = tuple(INIT_WEIGHTS.as_list())
    refine_weights: tuple = tuple(REFINE_WEIGHTS.as_list())
    sparsity: int = 1000
    noise: bool = False
    seed: int = 0
    mesh_vertices: int = 256
    init_iterations: int = 150
    init_learning_rate: float = 0.5
    epochs: int = 200
    learning_rate: float = 5e-4
    train_samples: int = 10000
    eval_samples: int = 10000
    pgt_stride: int = 1
    sparsity_levels: tuple = (500, 1000, 2000)
    workers: int = 1
    generate: dict = field(default_factory=dict)  # DatasetConfig overrides

    def __post_init__(self):
        for name in ("methods", "variants", "init_weights", "refine_weights", "sparsity_levels"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}")
        bad = set(self.variants) - set(VARIANTS)
        if bad:
            raise ConfigError(f"unknown variants {sorted(bad)}")
        try:
            LossWeights.from_list(self.init_weights)
            LossWeights.from_list(self.refine_weights)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        side = math.isqrt(self.mesh_vertices) if self.mesh_vertices > 0 else 0
        if side < 2 or side * side != self.mesh_vertices:
            raise ConfigError(f"mesh_vertices must be a square >= 4, got {self.mesh_vertices}")
        if self.sparsity not in self.sparsity_levels:
            raise ConfigError(f"sparsity {self.sparsity} is not one of {self.sparsity_levels}")
        if self.workers < 1 or self.epochs < 0 or self.init_iterations < 1:
            raise ConfigError("workers and init_iterations must be >= 1, epochs >= 0")

    @classmethod
    def from_json(cls, d, base=None):
        """Build from a JSON object; relative paths resolve against ``base``."""
        if not isinstance(d, dict):
            raise ConfigError("run config must be a JSON object")
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        d = dict(d)
        if base is not None:
            for key in ("dataset", "checkpoints", "output"):
                if key in d:
                    d[key] = str(Path(base) / d[key])
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: malformed JSON ({e})") from None
        return cls.from_json(d, base=path.parent)

    def to_json(self):
        return json.loads(json.dumps(asdict(self)))

    def require(self, *names):
        for name in names:
            if not Path(getattr(self, name)).exists():
                raise ConfigError(f"{name} path {getattr(self, name)} does not exist")

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def dataset_config(self):
        d = {**DatasetConfig(seed=self.seed).to_json(), **self.generate}
        return DatasetConfig.from_json(d)

    def init_config(self):
        side = math.isqrt(self.mesh_vertices)
        return InitConfig(grid_rows=side, grid_cols=side, iterations=self.init_iterations,
                          learning_rate=self.init_learning_rate,
                          weights=LossWeights.from_list(self.init_weights))

    def train_config(self, variant):
        return TrainConfig(epochs=self.epochs, learning_rate=self.learning_rate,
                           weights=LossWeights.from_list(self.refine_weights), variant=variant, seed=self.seed,
                           n_samples=self.train_samples, pgt_stride=self.pgt_stride)

    def checkpoint_path(self, variant):
        return Path(self.checkpoints) / f"{variant}.npz"


def refine_input(scene, init_mesh):
    return RefineInput(scene.scene_id, scene.rgb, scene.sparse, scene.camera, init_mesh, scene.gt)


def initialized(scene, cfg):
    return run_initialization(scene.sparse, scene.camera, cfg.init_config())


def training_items(cfg, split):
    """Training keyframes at ``cfg.sparsity``; alternate keyframes of a sequence use the noisy variant."""
    manifest = load_manifest(cfg.dataset)
    items = []
    for i, kf in enumerate(keyframes(manifest, split)):
        scene = load_scene(cfg.dataset, kf, cfg.sparsity, noise=bool(i % 2))
        items.append(refine_input(scene, initialized(scene, cfg).mesh))
    return items


def train_variant(cfg, variant, log_dir=None):
    """Fit one input variant on the train split and save its checkpoint."""
    cfg.require("dataset")
    Path(cfg.checkpoints).mkdir(parents=True, exist_ok=True)
    train_items = training_items(cfg, "train")
    val_items = training_items(cfg, "val")
    metrics = Path(log_dir) / f"train_{variant}.csv" if log_dir else None
    if metrics:
        metrics.parent.mkdir(parents=True, exist_ok=True)
    return train(train_items, val_items, cfg.train_config(variant), metrics_path=metrics,
                 checkpoint_path=cfg.checkpoint_path(variant))


def load_models(cfg, methods=None):
    """Checkpoints for the learned methods; returns (models by method, notes about missing ones)."""
    models, notes = {}, []
    for method in methods or cfg.methods:
        variant = METHOD_VARIANT.get(method)
        if variant is None:
            continue
        path = cfg.checkpoint_path(variant)
        if not path.exists():
            notes.append(f"{method}: no checkpoint at {path}; method not evaluated")
            continue
        model = RefineModel.load(path)
        if model.variant != variant:
            raise ConfigError(f"{path} holds a {model.variant!r} model, expected {variant!r}")
        models[method] = model
    return models, notes
