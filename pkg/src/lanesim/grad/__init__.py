from . import nn, ops
from .check import grad_check
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .nn import GaussianParams, kl_diag_gaussian, reparam_sample
from .value import ShapeError, Value, is_grad_enabled, no_grad

__all__ = [
    "CheckpointError",
    "GaussianParams",
    "ShapeError",
    "Value",
    "grad_check",
    "is_grad_enabled",
    "kl_diag_gaussian",
    "load_checkpoint",
    "nn",
    "no_grad",
    "ops",
    "reparam_sample",
    "save_checkpoint",
]
