"""Reverse-mode automatic differentiation over float64 numpy arrays."""

from danet.autodiff.optim import LrSchedule, ParameterStore, adam_step, truncated_normal_init
from danet.autodiff.tensor import (
    Tensor,
    absolute,
    add,
    affine,
    backward,
    concat,
    conv2d_relu_mean,
    conv2d_valid,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    scale,
    sigmoid,
    sub,
    sum,
)

__all__ = [
    "LrSchedule",
    "ParameterStore",
    "Tensor",
    "absolute",
    "adam_step",
    "add",
    "affine",
    "backward",
    "concat",
    "conv2d_relu_mean",
    "conv2d_valid",
    "matmul",
    "mean",
    "mul",
    "relu",
    "reshape",
    "scale",
    "sigmoid",
    "sub",
    "sum",
    "truncated_normal_init",
]
