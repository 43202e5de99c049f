"""Parameterized building blocks shared by the codec and the translator.

Every layer registers its tensors in a `ParameterStore` under a dotted prefix
at construction time and is called like a function afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ParameterStore, Tensor
from .autodiff import functional as F


@dataclass
class Mode:
    """Run mode shared by all layers of one model (DropPath reads it)."""

    training: bool = False
    rng: np.random.Generator | None = field(default=None, repr=False)


class Conv2d:
    def __init__(self, store: ParameterStore, name: str, cin: int, cout: int, kernel: int,
                 groups: int = 1, bias: bool = True):
        if kernel % 2 == 0:
            raise ValueError(f"{name}: even kernel size {kernel} is unsupported")
        self.cin, self.cout, self.kernel, self.groups = cin, cout, kernel, groups
        fan_in = (cin // groups) * kernel * kernel
        self.weight = store.normal(f"{name}.weight", (cout, cin // groups, kernel, kernel),
                                   std=1.0 / np.sqrt(fan_in))
        self.bias = store.zeros(f"{name}.bias", (cout,)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, groups=self.groups)

    def macs(self, h: int, w: int) -> int:
        return self.cout * (self.cin // self.groups) * self.kernel * self.kernel * h * w


def depthwise(store: ParameterStore, name: str, channels: int, kernel: int, bias: bool = True) -> Conv2d:
    return Conv2d(store, name, channels, channels, kernel, groups=channels, bias=bias)


def pointwise(store: ParameterStore, name: str, cin: int, cout: int, bias: bool = True) -> Conv2d:
    return Conv2d(store, name, cin, cout, 1, bias=bias)


class SpatialLayerNorm:
    """Per-channel normalization over spatial positions with learnable affine."""

    def __init__(self, store: ParameterStore, name: str, channels: int, eps: float = 1e-6):
        self.weight = store.full(f"{name}.weight", (channels,), 1.0)
        self.bias = store.zeros(f"{name}.bias", (channels,))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return F.layer_norm_spatial(x, self.weight, self.bias, self.eps)


class GRN:
    def __init__(self, store: ParameterStore, name: str, channels: int, eps: float = 1e-6):
        self.gamma = store.zeros(f"{name}.gamma", (channels,))
        self.beta = store.zeros(f"{name}.beta", (channels,))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return F.global_response_norm(x, self.gamma, self.beta, self.eps)


class LayerScale:
    def __init__(self, store: ParameterStore, name: str, channels: int, init: float = 1e-6):
        self.scale = store.full(name, (channels,), init)

    def __call__(self, x: Tensor) -> Tensor:
        return x * self.scale.reshape(1, -1, 1, 1)

