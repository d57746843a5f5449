"""Learned mesh refinement: encoder, vertex alignment, graph convolution, cascade, training."""
from .align import align_features, bilinear_sample
from .edt import edt
from .encoder import VARIANTS, conv2d, encoder_input, extract_features
from .gcn import gcn_forward, normalized_adjacency
from .model import RefineInput, RefineModel, refine_cascade
from .train import TrainConfig, Trainer, TrainingDivergedError, train

__all__ = [
    "RefineInput", "RefineModel", "TrainConfig", "Trainer", "TrainingDivergedError", "VARIANTS",
    "align_features", "bilinear_sample", "conv2d", "edt", "encoder_input", "extract_features",
    "gcn_forward", "normalized_adjacency", "refine_cascade", "train",
]
