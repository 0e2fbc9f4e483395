"""Minimal reverse-mode engine and the network kernels built on it."""

from .adam import AdamState, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .fourier import fft2, ifft2
from .layers import BnParams, ConvParams, batchnorm, conv2d
from .tensor import (
    Tensor,
    add,
    backward,
    concat,
    constant,
    mul,
    narrow,
    neg,
    parameter,
    relu,
    sub,
    sum_all,
)
from .tomo import fbp_layer, pad_layer, project_layer, restrict_layer

__all__ = [
    "AdamState",
    "BnParams",
    "ConvParams",
    "Tensor",
    "adam_step",
    "add",
    "backward",
    "batchnorm",
    "concat",
    "constant",
    "conv2d",
    "fbp_layer",
    "fft2",
    "ifft2",
    "load_checkpoint",
    "mul",
    "narrow",
    "neg",
    "pad_layer",
    "parameter",
    "project_layer",
    "relu",
    "restrict_layer",
    "save_checkpoint",
    "sub",
    "sum_all",
]
