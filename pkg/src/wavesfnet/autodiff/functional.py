"""Differentiable neural-network operations on `Tensor`.

Complex values are carried as real tensors with a trailing axis of length 2
(real, imaginary). Convolutions are cross-correlations with unit stride.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf, expit

from .tensor import (
    ShapeError,
    Tensor,
    concat,
    make_node,
    mean,
    mul,
    reshape,
    sqrt,
    square,
    sub,
    unbroadcast,
)

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


# -- convolution -------------------------------------------------------------


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           padding: int | None = None, groups: int = 1) -> Tensor:
    """2D cross-correlation, stride 1, zero padding.

    x: (B, Cin, H, W); weight: (Cout, Cin // groups, kh, kw); bias: (Cout,).
    `padding=None` means "same" padding ((k - 1) // 2 per side).
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects 4D input and weight, got {x.shape} and {weight.shape}")
    B, cin, H, W = x.shape
    cout, cin_g, kh, kw = weight.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"even kernel size {kh}x{kw} is unsupported")
    if groups < 1 or cin % groups or cout % groups:
        raise ShapeError(f"channels ({cin} in, {cout} out) not divisible by groups={groups}")
    if cin_g != cin // groups:
        raise ShapeError(f"weight expects {cin_g * groups} input channels, input has {cin}")
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"bias shape {bias.shape} does not match {cout} output channels")
    ph = pw = (kh - 1) // 2 if padding is None else int(padding)
    if padding is None:
        pw = (kw - 1) // 2
    if not (0 <= ph <= kh - 1 and 0 <= pw <= kw - 1):
        raise ShapeError(f"padding {padding} out of range for kernel {kh}x{kw}")

    xd, wd = x.data, weight.data
    Ho, Wo = H + 2 * ph - kh + 1, W + 2 * pw - kw + 1
    if Ho < 1 or Wo < 1:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {H}x{W}")
    xp = np.pad(xd, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else xd

    depthwise = groups == cin and cin_g == 1 and cout == cin
    if depthwise:
        out = np.zeros((B, cout, Ho, Wo), dtype=xd.dtype)
        for i in range(kh):
            for j in range(kw):
                out += xp[:, :, i:i + Ho, j:j + Wo] * wd[:, 0, i, j][None, :, None, None]
    elif groups == 1:
        cols = _im2col(xp, kh, kw, Ho, Wo)
        out = np.matmul(wd.reshape(cout, -1), cols).reshape(B, cout, Ho, Wo)
    else:
        og = cout // groups
        xg = xp.reshape(B, groups, cin_g, H + 2 * ph, W + 2 * pw)
        wg = wd.reshape(groups, og, cin_g, kh, kw)
        out = np.zeros((B, groups, og, Ho * Wo), dtype=xd.dtype)
        for i in range(kh):
            for j in range(kw):
                patch = xg[:, :, :, i:i + Ho, j:j + Wo].reshape(B, groups, cin_g, Ho * Wo)
                out += np.matmul(wg[:, :, :, i, j], patch)
        out = out.reshape(B, cout, Ho, Wo)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    def backward(g):
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(wd)
        if depthwise:
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + Ho, j:j + Wo] += g * wd[:, 0, i, j][None, :, None, None]
                    gw[:, 0, i, j] = np.einsum("bchw,bchw->c", g, xp[:, :, i:i + Ho, j:j + Wo])
        elif groups == 1:
            g2 = g.reshape(B, cout, Ho * Wo)
            gw = np.matmul(g2, np.swapaxes(cols, 1, 2)).sum(axis=0).reshape(wd.shape)
            gcols = np.matmul(wd.reshape(cout, -1).T, g2).reshape(B, cin, kh, kw, Ho, Wo)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + Ho, j:j + Wo] += gcols[:, :, i, j]
        else:
            og = cout // groups
            gg = g.reshape(B, groups, og, Ho * Wo)
            gxg = gxp.reshape(B, groups, cin_g, H + 2 * ph, W + 2 * pw)
            wg = wd.reshape(groups, og, cin_g, kh, kw)
            gwg = gw.reshape(groups, og, cin_g, kh, kw)
            xg = xp.reshape(B, groups, cin_g, H + 2 * ph, W + 2 * pw)
            wT = np.swapaxes(wg, 1, 2)
            for i in range(kh):
                for j in range(kw):
                    contrib = np.matmul(wT[:, :, :, i, j], gg)
                    gxg[:, :, :, i:i + Ho, j:j + Wo] += contrib.reshape(B, groups, cin_g, Ho, Wo)
                    patch = xg[:, :, :, i:i + Ho, j:j + Wo].reshape(B, groups, cin_g, Ho * Wo)
                    gwg[:, :, :, i, j] = np.matmul(gg, np.swapaxes(patch, 2, 3)).sum(axis=0)
        gx = gxp[:, :, ph:ph + H, pw:pw + W] if (ph or pw) else gxp
        gb = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return (np.ascontiguousarray(gx), gw, gb) if bias is not None else (np.ascontiguousarray(gx), gw)

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return make_node(out, parents, backward)


def _im2col(xp: np.ndarray, kh: int, kw: int, Ho: int, Wo: int) -> np.ndarray:
    """(B, C, Hp, Wp) -> (B, C * kh * kw, Ho * Wo), rows ordered (c, i, j)."""
    B, C = xp.shape[:2]
    if kh == 1 and kw == 1:
        return xp.reshape(B, C, Ho * Wo)
    cols = np.empty((B, C, kh, kw, Ho, Wo), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + Ho, j:j + Wo]
    return cols.reshape(B, C * kh * kw, Ho * Wo)


# -- activations -------------------------------------------------------------


def sigmoid(x: Tensor) -> Tensor:
    s = expit(x.data)
    return make_node(s, (x,), lambda g: (g * s * (1.0 - s),))


def silu(x: Tensor) -> Tensor:
    s = expit(x.data)
    xd = x.data
    return make_node(xd * s, (x,), lambda g: (g * s * (1.0 + xd * (1.0 - s)),))


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x), with Phi the standard normal CDF."""
    xd = x.data
    cdf = 0.5 * (1.0 + erf(xd * _INV_SQRT2))
    pdf = _INV_SQRT2PI * np.exp(-0.5 * xd * xd)
    return make_node((xd * cdf).astype(xd.dtype), (x,),
                     lambda g: ((g * (cdf + xd * pdf)).astype(xd.dtype),))


ACTIVATIONS = {"gelu": gelu, "silu": silu, "sigmoid": sigmoid}


def activation(x: Tensor, kind: str) -> Tensor:
    try:
        fn = ACTIVATIONS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    if not np.all(np.isfinite(x.data)):
        raise ValueError("activation received non-finite input")
    return fn(x)


# -- pooling and resampling --------------------------------------------------


def global_pool(x: Tensor, kind: str = "avg") -> Tensor:
    """Per-channel spatial statistic, (B, C, H, W) -> (B, C, 1, 1).

    For "max" the gradient is routed to the first maximal element in
    row-major order.
    """
    if kind == "avg":
        return mean(x, axis=(2, 3), keepdims=True)
    if kind != "max":
        raise ValueError(f"unknown pooling kind {kind!r}")
    B, C, H, W = x.shape
    flat = x.data.reshape(B, C, H * W)
    idx = np.argmax(flat, axis=2)
    out = np.take_along_axis(flat, idx[..., None], axis=2).reshape(B, C, 1, 1)

    def backward(g):
        gx = np.zeros((B, C, H * W), dtype=x.dtype)
        np.put_along_axis(gx, idx[..., None], g.reshape(B, C, 1), axis=2)
        return (gx.reshape(B, C, H, W),)

    return make_node(out, (x,), backward)


def avg_downsample2x(x: Tensor) -> Tensor:
    B, C, H, W = x.shape
    if H % 2 or W % 2:
        raise ShapeError(f"odd spatial extent {H}x{W}")
    return mean(reshape(x, (B, C, H // 2, 2, W // 2, 2)), axis=(3, 5))


def upsample_nearest2x(x: Tensor) -> Tensor:
    B, C, H, W = x.shape
    ones = Tensor(np.ones((1, 1, 1, 2, 1, 2), dtype=x.dtype))
    return reshape(mul(reshape(x, (B, C, H, 1, W, 1)), ones), (B, C, 2 * H, 2 * W))


# -- Fourier transforms ------------------------------------------------------


def _to_complex(a: np.ndarray) -> np.ndarray:
    return a[..., 0] + 1j * a[..., 1]


def _to_pair(z: np.ndarray, dtype) -> np.ndarray:
    return np.stack([z.real, z.imag], axis=-1).astype(dtype)


def rfft2(x: Tensor) -> Tensor:
    """Unnormalized 2D real FFT over the last two axes.

    (..., H, W) -> (..., H, W // 2 + 1, 2) with (real, imag) in the last axis.
    """
    H, W = x.shape[-2:]
    wr = W // 2 + 1
    dtype = x.dtype

    def backward(g):
        # adjoint of the half-spectrum map: zero-extend to full width, inverse DFT
        full = np.zeros(g.shape[:-3] + (H, W), dtype=np.complex128)
        full[..., :wr] = _to_complex(g)
        return (np.real(np.fft.ifft2(full)).astype(dtype) * (H * W),)

    return make_node(_to_pair(np.fft.rfft2(x.data), dtype), (x,), backward)


def irfft2(y: Tensor, width: int) -> Tensor:
    """Inverse of `rfft2` with 1/(H*W) normalization; `width` is the original W."""
    if y.shape[-1] != 2:
        raise ShapeError(f"expected trailing (real, imag) axis, got shape {y.shape}")
    H, wr = y.shape[-3], y.shape[-2]
    if wr != width // 2 + 1:
        raise ShapeError(f"half-spectrum width {wr} does not match target width {width}")
    dtype = y.dtype
    # columns that irfft folds in twice (all but DC and, for even width, Nyquist)
    weights = np.full(wr, 2.0)
    weights[0] = 1.0
    if width % 2 == 0:
        weights[-1] = 1.0

    def backward(g):
        adj = np.fft.rfft2(g) * (weights / (H * width))
        return (_to_pair(adj, dtype),)

    out = np.fft.irfft2(_to_complex(y.data), s=(H, width)).astype(dtype)
    return make_node(out, (y,), backward)


def complex_mul(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise complex product of (…, 2) pair tensors, with broadcasting."""
    za, zb = _to_complex(a.data), _to_complex(b.data)
    sa, sb = a.shape[:-1], b.shape[:-1]
    dtype = np.result_type(a.dtype, b.dtype)

    def backward(g):
        zg = _to_complex(g)
        ga = _to_pair(unbroadcast(zg * np.conj(zb), sa), dtype)
        gb = _to_pair(unbroadcast(zg * np.conj(za), sb), dtype)
        return ga, gb

    return make_node(_to_pair(za * zb, dtype), (a, b), backward)


def spectral_filter(x: Tensor, weights: Tensor) -> Tensor:
    """irfft2(rfft2(x) * weights); weights shaped (C, H, W // 2 + 1, 2)."""
    return irfft2(complex_mul(rfft2(x), weights), x.shape[-1])


# -- normalization, regularization, loss -------------------------------------


def layer_norm_spatial(x: Tensor, weight: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize each channel over its spatial positions, then per-channel affine."""
    mu = mean(x, axis=(2, 3), keepdims=True)
    xc = sub(x, mu)
    var = mean(square(xc), axis=(2, 3), keepdims=True)
    y = xc / sqrt(var + eps)
    return y * reshape(weight, (1, -1, 1, 1)) + reshape(bias, (1, -1, 1, 1))


def global_response_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """GRN: x + gamma * (x * N(x)) + beta with N the channel-relative spatial L2 norm."""
    gx = sqrt(square(x).sum(axis=(2, 3), keepdims=True))
    nx = gx / (mean(gx, axis=1, keepdims=True) + eps)
    g = reshape(gamma, (1, -1, 1, 1))
    b = reshape(beta, (1, -1, 1, 1))
    return x + g * (x * nx) + b


def drop_path(x: Tensor, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Stochastic depth on the leading (sample) axis; identity when rate is 0 or not training."""
    if rate <= 0.0 or not training:
        return x
    if rng is None:
        raise ValueError("drop_path needs a generator when active")
    keep = 1.0 - rate
    mask = (rng.random((x.shape[0],) + (1,) * (x.ndim - 1)) < keep).astype(x.dtype) / keep
    return mul(x, Tensor(mask))


def mse_loss(pred: Tensor, target) -> Tensor:
    target = target if isinstance(target, Tensor) else Tensor(np.asarray(target, dtype=pred.dtype))
    return mean(square(sub(pred, target)))


__all__ = [
    "ACTIVATIONS", "activation", "avg_downsample2x", "complex_mul", "concat", "conv2d", "drop_path",
    "gelu", "global_pool", "global_response_norm", "irfft2", "layer_norm_spatial", "mse_loss",
    "rfft2", "sigmoid", "silu", "spectral_filter", "upsample_nearest2x",
]
