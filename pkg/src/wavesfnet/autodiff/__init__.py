"""Minimal reverse-mode autodiff over numpy arrays, restricted to the operation
set the prediction network needs."""

from . import functional
from .gradcheck import grad_check, numerical_gradient, relative_error
from .params import ParameterStore
from .tensor import (
    GraphError,
    ShapeError,
    Tensor,
    add,
    build_tensor,
    concat,
    div,
    elementwise_shape_op,
    is_grad_enabled,
    mean,
    mul,
    no_grad,
    permute,
    reshape,
    scale,
    slice_,
    split,
    sqrt,
    square,
    stack,
    sub,
    sum_,
)

__all__ = [
    "GraphError", "ParameterStore", "ShapeError", "Tensor", "add", "build_tensor", "concat", "div",
    "elementwise_shape_op", "functional", "grad_check", "is_grad_enabled", "mean", "mul", "no_grad",
    "numerical_gradient", "permute", "relative_error", "reshape", "scale", "slice_", "split", "sqrt",
    "square", "stack", "sub", "sum_",
]
