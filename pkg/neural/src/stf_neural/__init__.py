"""Toy-scale dual-branch fusion network with deformable alignment."""

from .export import export_run, reconstruct
from .model import FusionNet, ModelConfig
from .train import (TrainConfig, charbonnier, cosine_lr, load_checkpoint,
                    save_checkpoint, train_toy)

__version__ = "0.1.0"
