"""
structinfer - gated structure inference machines for scene-plus-persons graphs.

The package unrolls message passing over a fully connected graph of one scene node and a
variable number of person nodes into a trainable network whose learned gates decide which
edges carry information.
"""

import logging

from .ablation import VARIANTS, lambda_sweep, run_ablation
from .config import settings
from .exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    InstanceValidationError,
    InvalidArgumentError,
    MissingLabelsError,
    PersistenceError,
    StructInferError,
    UnsupportedVersionError,
)
from .gate_report import export_gates
from .gradients import backward, finite_diff_oracle
from .inference import forward, predict_labels
from .losses import loss
from .models import (
    Dims,
    EpochMetrics,
    EvaluationReport,
    FrameInstance,
    LossBreakdown,
    SynthConfig,
    SynthInstance,
    TrainConfig,
)
from .optim import sgd_step
from .params import Checkpoint, ModelParams, init_params
from .synth import corrupt, generate
from .topology import build_topology, network_width
from .trainer import Trainer, evaluate, train
from .version import __version__

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "Checkpoint",
    "ConfigurationError",
    "DimensionMismatchError",
    "Dims",
    "EpochMetrics",
    "EvaluationReport",
    "FrameInstance",
    "InstanceValidationError",
    "InvalidArgumentError",
    "LossBreakdown",
    "MissingLabelsError",
    "ModelParams",
    "PersistenceError",
    "StructInferError",
    "SynthConfig",
    "SynthInstance",
    "TrainConfig",
    "Trainer",
    "UnsupportedVersionError",
    "VARIANTS",
    "__version__",
    "backward",
    "build_topology",
    "corrupt",
    "evaluate",
    "export_gates",
    "finite_diff_oracle",
    "forward",
    "generate",
    "init_params",
    "lambda_sweep",
    "loss",
    "network_width",
    "predict_labels",
    "run_ablation",
    "settings",
    "sgd_step",
    "train",
]
