"""Reverse-mode numerics: tensors, layer kernels, loss, SGD, grad checks."""

from .tensor import GradMap, Parameter, Tensor
from .ops import (
    ShapeError,
    affine,
    avg_pool,
    conv2d,
    layer_forward,
    loss_and_grad,
    relu,
    softmax_cross_entropy,
)
from .optim import SGD
from .gradcheck import finite_diff_check

__all__ = [
    "GradMap",
    "Parameter",
    "Tensor",
    "ShapeError",
    "affine",
    "avg_pool",
    "conv2d",
    "layer_forward",
    "loss_and_grad",
    "relu",
    "softmax_cross_entropy",
    "SGD",
    "finite_diff_check",
]
