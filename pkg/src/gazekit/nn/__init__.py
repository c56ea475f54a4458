"""Minimal dense-tensor neural engine: layers, losses, Adam, gradient checks."""

from .gradcheck import grad_check, layer_input_grad_check, relative_error
from .layers import (
    Concat,
    Conv2D,
    Flatten,
    FullyConnected,
    Layer,
    MaxPool2D,
    Param,
    ReLU,
    ShapeError,
    col2im,
    im2col,
    kaiming_uniform,
)
from .losses import euclidean_loss, smooth_l1_loss
from .optim import Adam

__all__ = [
    "Adam",
    "Concat",
    "Conv2D",
    "Flatten",
    "FullyConnected",
    "Layer",
    "MaxPool2D",
    "Param",
    "ReLU",
    "ShapeError",
    "col2im",
    "im2col",
    "kaiming_uniform",
    "euclidean_loss",
    "smooth_l1_loss",
    "grad_check",
    "layer_input_grad_check",
    "relative_error",
]
