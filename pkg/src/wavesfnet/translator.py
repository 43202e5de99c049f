"""Temporal difference injection and the stack of dual-domain ST blocks.

Latent sequences are (B, T, C, h, w). The ST blocks run on the time-packed
layout (B, T * C, h, w), where frame t, channel c sits at packed channel
t * C + c.
"""

from __future__ import annotations

import numpy as np

from .autodiff import ShapeError, Tensor, concat, reshape, split
from .autodiff import functional as F
from .layers import GRN, LayerScale, Mode, SpatialLayerNorm, depthwise, pointwise

SPATIAL_KERNEL = 9
PSI_INIT_STD = 0.02
LAYER_SCALE_INIT = 1e-6


def pack(z: Tensor) -> Tensor:
    """(B, T, C, h, w) -> (B, T * C, h, w)."""
    if z.ndim != 5:
        raise ShapeError(f"pack expects (B, T, C, h, w), got {z.shape}")
    B, T, C, h, w = z.shape
    return reshape(z, (B, T * C, h, w))


def unpack(x: Tensor, channels: int) -> Tensor:
    """(B, T * C, h, w) -> (B, T, C, h, w) for C = `channels`."""
    B, ct, h, w = x.shape
    if ct % channels:
        raise ShapeError(f"packed width {ct} not divisible by latent width {channels}")
    return reshape(x, (B, ct // channels, channels, h, w))


def frame_wise(layer, z: Tensor) -> Tensor:
    """Apply a (N, C, h, w) layer to every frame of (B, T, C, h, w)."""
    B, T = z.shape[:2]
    out = layer(reshape(z, (B * T,) + z.shape[2:]))
    return reshape(out, (B, T) + out.shape[1:])


def temporal_difference(z: Tensor) -> Tensor:
    """Delta_t = Z_t - Z_{t-1} along axis 1, with Delta_1 = 0."""
    first = Tensor(np.zeros((z.shape[0], 1) + z.shape[2:], dtype=z.dtype))
    if z.shape[1] == 1:
        return first
    return concat([first, z[:, 1:] - z[:, :-1]], axis=1)


class TDI:
    """Z~_t = Z_t + g * SiLU(DWConv3x3(Delta Z_t)); g starts at zero."""

    def __init__(self, store, name: str, channels: int):
        self.channels = channels
        self.dw = depthwise(store, f"{name}.dw", channels, 3, bias=False)
        self.gate = store.zeros(f"{name}.gate", (channels,))

    def __call__(self, z: Tensor) -> Tensor:
        if z.shape[2] != self.channels:
            raise ShapeError(f"TDI expects {self.channels} channels, got {z.shape[2]}")
        motion = F.silu(frame_wise(self.dw, temporal_difference(z)))
        return z + motion * self.gate.reshape(1, 1, -1, 1, 1)

    def macs(self, h: int, w: int) -> int:
        return self.dw.macs(h, w)


class STBlock:
    """Dual-domain context extraction followed by channel mixing.

    Context:  y = norm(x); u = DWConv9x9(y) + irfft2(rfft2(y) * psi);
              x <- x + DropPath(lambda_a * u)
    Mixing:   y = norm(x); [a; v] = split(W_e y); v = GRN(DWConv3x3(v));
              x <- x + DropPath(lambda_b * W_o(SiLU(a) * v))

    `spatial` / `frequency` switch the two context branches; `mixer="mlp"`
    swaps the gated mixing for W_2 GELU(W_1 y).
    """

    def __init__(self, store, name: str, channels: int, h: int, w: int, mode: Mode,
                 spatial: bool = True, frequency: bool = True, mixer: str = "gated",
                 droppath_rate: float = 0.0):
        if not (spatial or frequency):
            raise ValueError("an ST block needs at least one context branch")
        if mixer not in ("gated", "mlp"):
            raise ValueError(f"unknown mixer {mixer!r}")
        self.channels, self.h, self.w = channels, h, w
        self.mode, self.mixer, self.droppath_rate = mode, mixer, droppath_rate
        self.norm1 = SpatialLayerNorm(store, f"{name}.norm1", channels)
        self.spatial = depthwise(store, f"{name}.dw9", channels, SPATIAL_KERNEL) if spatial else None
        self.psi = None
        if frequency:
            noise = PSI_INIT_STD * store.rng.standard_normal((channels, h, w // 2 + 1, 2))
            noise[..., 0] += 1.0
            self.psi = store.add(f"{name}.psi", noise, complex_valued=True)
        self.scale_a = LayerScale(store, f"{name}.scale_a", channels, LAYER_SCALE_INIT)
        self.norm2 = SpatialLayerNorm(store, f"{name}.norm2", channels)
        if mixer == "gated":
            self.expand = pointwise(store, f"{name}.expand", channels, 2 * channels)
            self.dw3 = depthwise(store, f"{name}.dw3", channels, 3)
            self.grn = GRN(store, f"{name}.grn", channels)
            self.out = pointwise(store, f"{name}.out", channels, channels)
        else:
            self.fc1 = pointwise(store, f"{name}.fc1", channels, 2 * channels)
            self.fc2 = pointwise(store, f"{name}.fc2", 2 * channels, channels)
        self.scale_b = LayerScale(store, f"{name}.scale_b", channels, LAYER_SCALE_INIT)

    def _check(self, x: Tensor) -> None:
        if x.shape[1:] != (self.channels, self.h, self.w):
            raise ShapeError(f"ST block configured for {(self.channels, self.h, self.w)}, got {x.shape[1:]}")

    def _drop(self, x: Tensor) -> Tensor:
        return F.drop_path(x, self.droppath_rate, self.mode.training, self.mode.rng)

    def context_branch(self, y: Tensor) -> Tensor:
        """S + P on the normalized input (either term absent in ablations)."""
        terms = []
        if self.spatial is not None:
            terms.append(self.spatial(y))
        if self.psi is not None:
            terms.append(F.spectral_filter(y, self.psi))
        return terms[0] if len(terms) == 1 else terms[0] + terms[1]

    def context(self, x: Tensor) -> Tensor:
        self._check(x)
        return x + self._drop(self.scale_a(self.context_branch(self.norm1(x))))

    def mixing_branch(self, y: Tensor) -> Tensor:
        if self.mixer == "mlp":
            return self.fc2(F.gelu(self.fc1(y)))
        gate, value = split(self.expand(y), 2, axis=1)
        return self.out(F.silu(gate) * self.grn(self.dw3(value)))

    def mixing(self, x: Tensor) -> Tensor:
        self._check(x)
        return x + self._drop(self.scale_b(self.mixing_branch(self.norm2(x))))

    def __call__(self, x: Tensor) -> Tensor:
        return self.mixing(self.context(x))

    def macs(self) -> int:
        h, w = self.h, self.w
        total = 0
        if self.spatial is not None:
            total += self.spatial.macs(h, w)
        if self.psi is not None:
            total += spectral_macs(self.channels, h, w)
        if self.mixer == "gated":
            total += self.expand.macs(h, w) + self.dw3.macs(h, w) + self.out.macs(h, w)
        else:
            total += self.fc1.macs(h, w) + self.fc2.macs(h, w)
        return total


def spectral_macs(channels: int, h: int, w: int) -> int:
    """Analytic cost of rfft2 -> complex multiply -> irfft2 per forward."""
    n = h * w
    transform = 5.0 * n * np.log2(n) if n > 1 else 0.0
    return int(round(channels * (2 * transform + 4 * h * (w // 2 + 1))))


class Translator:
    """Frame-wise C_s -> C_z projection, TDI, N_t ST blocks on packed time, C_z -> C_s."""

    def __init__(self, store, width: int, latent: int, t_in: int, n_blocks: int, h: int, w: int,
                 mode: Mode, use_tdi: bool = True, spatial: bool = True, frequency: bool = True,
                 mixer: str = "gated", droppath_rate: float = 0.0):
        self.width, self.latent, self.t_in = width, latent, t_in
        self.h, self.w = h, w
        self.proj_in = pointwise(store, "translator.proj_in", width, latent)
        self.tdi = TDI(store, "translator.tdi", latent) if use_tdi else None
        packed = t_in * latent
        self.blocks = [
            STBlock(store, f"translator.block{k}", packed, h, w, mode, spatial=spatial,
                    frequency=frequency, mixer=mixer, droppath_rate=droppath_rate)
            for k in range(n_blocks)
        ]
        self.proj_out = pointwise(store, "translator.proj_out", latent, width)
        self.blocks_run = 0

    def __call__(self, f_seq: Tensor) -> Tensor:
        if f_seq.ndim != 5 or f_seq.shape[1:] != (self.t_in, self.width, self.h, self.w):
            raise ShapeError(
                f"translator expects (B, {self.t_in}, {self.width}, {self.h}, {self.w}), got {f_seq.shape}")
        z = frame_wise(self.proj_in, f_seq)
        if self.tdi is not None:
            z = self.tdi(z)
        x = pack(z)
        for block in self.blocks:
            x = block(x)
            self.blocks_run += 1
        return frame_wise(self.proj_out, unpack(x, self.latent))

    def macs(self) -> int:
        h, w = self.h, self.w
        total = self.t_in * (self.proj_in.macs(h, w) + self.proj_out.macs(h, w))
        if self.tdi is not None:
            total += self.t_in * self.tdi.macs(h, w)
        return total + sum(b.macs() for b in self.blocks)
