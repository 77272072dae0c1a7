"""streamvq: no-reference streaming video quality assessment trained on
full-reference metric labels from synthetically degraded clips."""

__version__ = "0.1.0"

from .dataio import Clip, DatasetManifest, Frame, chunk_clip, load_clip, scan_dataset
from .degrade import ALL_KINDS, TRAIN_KINDS, VAL_KINDS, DegradationSpec, apply_degradation
from .labelgen import LabelRow, LabelTable, generate_labels
from .metrics import PerceptualExtractor, QualityTriplet, quality_triplet
from .model import ModelConfig, QualityPredictor, load_checkpoint, save_checkpoint
from .train import TrainConfig, mae_loss, train_loop

__all__ = [
    "Clip",
    "DatasetManifest",
    "Frame",
    "chunk_clip",
    "load_clip",
    "scan_dataset",
    "ALL_KINDS",
    "TRAIN_KINDS",
    "VAL_KINDS",
    "DegradationSpec",
    "apply_degradation",
    "LabelRow",
    "LabelTable",
    "generate_labels",
    "PerceptualExtractor",
    "QualityTriplet",
    "quality_triplet",
    "ModelConfig",
    "QualityPredictor",
    "load_checkpoint",
    "save_checkpoint",
    "TrainConfig",
    "mae_loss",
    "train_loop",
]
