"""Multiscale graph-convolutional human motion prediction."""

from .autodiff import Tensor, no_grad
from .data import MotionSequence, Window, WindowedDataset, make_windows, synth_motion
from .dct import DctConfig, dct_decode, dct_encode, pad_replicate
from .model import MGCN, ModelConfig
from .skeleton import ScaleId, SkeletonConfig, builtin_skeleton, load_skeleton, save_skeleton
from .training import (Adam, TrainConfig, evaluate, loss_mae, loss_mpjpe,
                       train, zero_velocity_baseline)

__version__ = "0.1.0"

__all__ = [
    "Tensor", "no_grad",
    "MotionSequence", "Window", "WindowedDataset", "make_windows", "synth_motion",
    "DctConfig", "dct_decode", "dct_encode", "pad_replicate",
    "MGCN", "ModelConfig",
    "ScaleId", "SkeletonConfig", "builtin_skeleton", "load_skeleton", "save_skeleton",
    "Adam", "TrainConfig", "evaluate", "loss_mae", "loss_mpjpe",
    "train", "zero_velocity_baseline",
    "__version__",
]
