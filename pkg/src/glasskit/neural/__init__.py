"""Tensor substrate: autodiff tape, layers, optimizer, checkpoints."""

from .tensor import (
    Tensor,
    add,
    backward,
    concat_channels,
    div,
    grad_enabled,
    mul,
    no_grad,
    relu,
    reshape,
    sigmoid,
    sub,
    tmean,
    tsum,
)
from .functional import (
    batch_norm,
    bilinear_resize,
    binary_cross_entropy_with_logits,
    conv2d,
    global_avg_pool,
    linear,
)
from .modules import BatchNorm2d, Conv2d, ConvBlock, Linear, Module, Param
from .optim import MomentumSGD, sgd_step
from .checkpoint import load_arrays, load_checkpoint, save_arrays, save_checkpoint
from .gradcheck import check_gradients, tensor64

__all__ = [
    "Tensor",
    "add",
    "backward",
    "concat_channels",
    "div",
    "grad_enabled",
    "mul",
    "no_grad",
    "relu",
    "reshape",
    "sigmoid",
    "sub",
    "tmean",
    "tsum",
    "batch_norm",
    "bilinear_resize",
    "binary_cross_entropy_with_logits",
    "conv2d",
    "global_avg_pool",
    "linear",
    "BatchNorm2d",
    "Conv2d",
    "ConvBlock",
    "Linear",
    "Module",
    "Param",
    "MomentumSGD",
    "sgd_step",
    "load_arrays",
    "load_checkpoint",
    "save_arrays",
    "save_checkpoint",
    "check_gradients",
    "tensor64",
]
