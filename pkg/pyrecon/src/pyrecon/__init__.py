"""pyrecon: toy convolutional reconstruction backend implementing the
directory-batch protocol."""

from .data import build_training_set, load_training_set, make_scene, quantize_two_level
from .model import ToyReconModel, TrainConfig, load_checkpoint, save_checkpoint
from .serve import serve_batch
from .train import (
    GradientCheckFailed,
    TrainingDiverged,
    TrainResult,
    finite_difference_gradient_check,
    train_toy,
)

__version__ = "0.1.0"
