"""Numerical substrate: tensors, reverse-mode autodiff, Adam."""
from . import flops
from .kernels import BACKEND
from .optim import Adam, AdamState, adam_step
from .tensor import (
    Tensor,
    add,
    as_tensor,
    backward,
    gelu,
    is_grad_enabled,
    layer_norm,
    matmul,
    mean,
    mul,
    no_grad,
    relu,
    reshape,
    softmax,
    softmax_rows,
    square,
    sub,
    sum_,
    swapaxes,
    unbroadcast,
)

__all__ = [
    "BACKEND", "Adam", "AdamState", "Tensor", "adam_step", "add", "as_tensor", "backward",
    "flops", "gelu", "is_grad_enabled", "layer_norm", "matmul", "mean", "mul", "no_grad",
    "relu", "reshape", "softmax", "softmax_rows", "square", "sub", "sum_", "swapaxes",
    "unbroadcast",
]
