"""Minimal reverse-mode autodiff over float64 numpy arrays."""
from .gradcheck import GradCheckReport, gradient_check
from .ops import (
    ConvKernel3D,
    avg_pool3d,
    concat_channels,
    conv3d,
    dense,
    global_avg_pool,
    max_pool3d,
    relu,
    softmax,
    softmax_cross_entropy,
)
from .optim import Adam, AdamState, adam_step
from .tensor import (
    Tensor,
    add,
    as_tensor,
    debug_mode,
    flatten,
    log,
    mean,
    mul,
    no_grad,
    reshape,
    set_debug,
    square,
    sum_all,
)

__all__ = [
    "Adam", "AdamState", "ConvKernel3D", "GradCheckReport", "Tensor", "adam_step", "add",
    "as_tensor", "avg_pool3d", "concat_channels", "conv3d", "debug_mode", "dense", "flatten",
    "global_avg_pool", "gradient_check", "log", "max_pool3d", "mean", "mul", "no_grad", "relu",
    "reshape", "set_debug", "softmax", "softmax_cross_entropy", "square", "sum_all",
]
