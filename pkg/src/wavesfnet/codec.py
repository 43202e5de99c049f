"""Wavelet encoder and wavelet-symmetric decoder.

All frame-wise operations take a (N, C, H, W) stack; callers fold batch and
time into N.
"""

from __future__ import annotations

from dataclasses import dataclass

from .autodiff import ShapeError, Tensor, concat, split
from .autodiff import functional as F
from .layers import Conv2d, SpatialLayerNorm, depthwise, pointwise
from . import wavelet

FS_KERNEL = 7


@dataclass
class EncodedFrame:
    skip: Tensor    # (N, C_s, H, W) shallow stem features
    latent: Tensor  # (N, C_s, H / 2**n_s, W / 2**n_s)


class FSBlock:
    """Frequency-selective residual block.

    y = norm(x); s = sigmoid(W_g [avgpool(y); maxpool(y)]);
    out = x + W_o dwconv7x7(y * s)
    """

    def __init__(self, store, name: str, channels: int):
        self.channels = channels
        self.norm = SpatialLayerNorm(store, f"{name}.norm", channels)
        self.gate = pointwise(store, f"{name}.gate", 2 * channels, channels)
        self.dw = depthwise(store, f"{name}.dw", channels, FS_KERNEL)
        self.proj = pointwise(store, f"{name}.proj", channels, channels)

    def gate_values(self, y: Tensor) -> Tensor:
        pooled = concat([F.global_pool(y, "avg"), F.global_pool(y, "max")], axis=1)
        return F.sigmoid(self.gate(pooled))

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.channels:
            raise ShapeError(f"FS block expects {self.channels} channels, got {x.shape[1]}")
        y = self.norm(x)
        return x + self.proj(self.dw(y * self.gate_values(y)))

    def macs(self, h: int, w: int) -> int:
        return self.gate.macs(1, 1) + self.dw.macs(h, w) + self.proj.macs(h, w)


class Stem:
    """Conv3x3 -> GELU -> Conv3x3 at full resolution."""

    def __init__(self, store, name: str, cin: int, cout: int):
        self.conv1 = Conv2d(store, f"{name}.conv1", cin, cout, 3)
        self.conv2 = Conv2d(store, f"{name}.conv2", cout, cout, 3)

    def __call__(self, x: Tensor) -> Tensor:
        return self.conv2(F.gelu(self.conv1(x)))

    def macs(self, h: int, w: int) -> int:
        return self.conv1.macs(h, w) + self.conv2.macs(h, w)


class _DownStage:
    """One encoder scale: Haar analysis, subband fusion, two FS blocks.

    With `wavelet=False` the sampling is a Conv3x3 followed by 2x2 averaging
    (the convolutional-codec ablation).
    """

    def __init__(self, store, name: str, width: int, use_wavelet: bool):
        self.use_wavelet = use_wavelet
        if use_wavelet:
            self.fuse = pointwise(store, f"{name}.fuse", 4 * width, width)
        else:
            self.conv = Conv2d(store, f"{name}.conv", width, width, 3)
        self.fs = [FSBlock(store, f"{name}.fs{k}", width) for k in range(2)]

    def __call__(self, x: Tensor) -> Tensor:
        if self.use_wavelet:
            bands = wavelet.haar_dwt2(x)
            x = self.fuse(concat(list(bands), axis=1))
        else:
            x = F.avg_downsample2x(self.conv(x))
        for block in self.fs:
            x = block(x)
        return x

    def macs(self, h: int, w: int) -> int:
        """`h, w` are the stage's input extents."""
        sample = self.fuse.macs(h // 2, w // 2) if self.use_wavelet else self.conv.macs(h, w)
        return sample + sum(b.macs(h // 2, w // 2) for b in self.fs)


class _UpStage:
    """One decoder scale: FS block, pointwise lift to four subbands, Haar synthesis."""

    def __init__(self, store, name: str, width: int, use_wavelet: bool):
        self.use_wavelet = use_wavelet
        self.width = width
        self.fs = FSBlock(store, f"{name}.fs", width)
        if use_wavelet:
            self.lift = pointwise(store, f"{name}.lift", width, 4 * width)
        else:
            self.conv = Conv2d(store, f"{name}.conv", width, width, 3)

    def __call__(self, x: Tensor) -> Tensor:
        x = self.fs(x)
        if self.use_wavelet:
            ll, hl, lh, hh = split(self.lift(x), 4, axis=1)
            return wavelet.haar_idwt2(wavelet.SubbandSet(ll, hl, lh, hh))
        return self.conv(F.upsample_nearest2x(x))

    def macs(self, h: int, w: int) -> int:
        """`h, w` are the stage's input (coarse) extents."""
        up = self.lift.macs(h, w) if self.use_wavelet else self.conv.macs(2 * h, 2 * w)
        return self.fs.macs(h, w) + up


class Encoder:
    def __init__(self, store, channels: int, width: int, n_stages: int, use_wavelet: bool = True):
        self.channels, self.width, self.n_stages = channels, width, n_stages
        self.stem = Stem(store, "encoder.stem", channels, width)
        self.stages = [_DownStage(store, f"encoder.stage{i + 1}", width, use_wavelet)
                       for i in range(n_stages)]

    def __call__(self, frames: Tensor) -> EncodedFrame:
        if frames.ndim == 3:
            frames = frames.reshape((1,) + frames.shape)
        _, c, H, W = frames.shape
        if c != self.channels:
            raise ShapeError(f"encoder expects {self.channels} channels, got {c}")
        factor = 2 ** self.n_stages
        if H % factor or W % factor:
            raise ShapeError(f"spatial extent {H}x{W} not divisible by 2**{self.n_stages}")
        skip = self.stem(frames)
        x = skip
        for stage in self.stages:
            x = stage(x)
        return EncodedFrame(skip=skip, latent=x)

    def macs(self, H: int, W: int) -> int:
        total = self.stem.macs(H, W)
        for i, stage in enumerate(self.stages):
            total += stage.macs(H >> i, W >> i)
        return total


class Decoder:
    def __init__(self, store, channels: int, width: int, n_stages: int, use_wavelet: bool = True):
        self.channels, self.width, self.n_stages = channels, width, n_stages
        self.stages = [_UpStage(store, f"decoder.stage{i + 1}", width, use_wavelet)
                       for i in range(n_stages)]
        self.readout = Conv2d(store, "decoder.readout", width, channels, 3)

    def __call__(self, latent: Tensor, skip: Tensor) -> Tensor:
        if latent.shape[0] != skip.shape[0]:
            raise ShapeError(f"{latent.shape[0]} latents but {skip.shape[0]} skip features")
        factor = 2 ** self.n_stages
        expected = (skip.shape[0], self.width, skip.shape[2] // factor, skip.shape[3] // factor)
        if latent.shape != expected or skip.shape[1] != self.width:
            raise ShapeError(f"latent {latent.shape} inconsistent with skip {skip.shape}")
        x = latent
        for stage in self.stages:
            x = stage(x)
        return self.readout(x + skip)

    def macs(self, H: int, W: int) -> int:
        total = self.readout.macs(H, W)
        for i, stage in enumerate(self.stages):
            total += stage.macs(H >> (self.n_stages - i), W >> (self.n_stages - i))
        return total
