"""Dynamic multi-scale graph convolution for 3D human motion forecasting.

A small numpy autodiff kernel (:mod:`dmsgcn.tensor`), the masked spatial and
temporal graph layers, the joint/bone/part model with its TCN decoder, data
loading, training, evaluation and a command line (``dmsgcn``).
"""

from .config import RunConfig, load_config
from .data import MotionSequence, WindowSample, load_csv, stack_samples, synth_windows, windows, write_csv
from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    DMSGCNError,
    NumericalError,
    ValidationError,
)
from .estimator import MotionForecaster, ScalePooler
from .metrics import HORIZONS_MS, horizon_frames, mpjpe, mpjpe_per_frame
from .model import DMSGCNModel, ModelConfig, load, mask_zero_count, param_count, save
from .skeleton import ScaleHierarchy, Skeleton, default_hierarchy, load_skeleton_config
from .tensor import Tensor, backward, no_grad
from .training import TrainSettings, evaluate, predict, train, zero_velocity

__version__ = "0.1.0"

__all__ = [
    "CheckpointError", "ConfigError", "ContractError", "DMSGCNError", "DMSGCNModel", "DataError",
    "DimensionError", "HORIZONS_MS", "ModelConfig", "MotionForecaster", "MotionSequence",
    "NumericalError", "RunConfig", "ScaleHierarchy", "ScalePooler", "Skeleton", "Tensor",
    "TrainSettings", "ValidationError", "WindowSample", "backward", "default_hierarchy",
    "evaluate", "horizon_frames", "load", "load_config", "load_csv", "load_skeleton_config",
    "mask_zero_count", "mpjpe", "mpjpe_per_frame", "no_grad", "param_count", "predict", "save",
    "stack_samples", "synth_windows", "train", "windows", "write_csv", "zero_velocity",
]
