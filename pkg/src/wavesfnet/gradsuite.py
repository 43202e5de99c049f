"""Finite-difference suites for every differentiable operation and block.

Each suite builds a float64 micro problem, reduces the output to a scalar by
contracting with a fixed random tensor (so no gradient is trivially uniform),
and returns the max relative error from `grad_check`.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .autodiff import ParameterStore, Tensor, grad_check
from .autodiff import functional as F
from .codec import FSBlock, Stem
from .config import ModelConfig
from .layers import Mode
from .model import WaveSFNet
from .translator import TDI, STBlock
from . import wavelet

TOLERANCE = 1e-4
EPS = 1e-5


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _leaf(rng, *shape) -> Tensor:
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def _probe(rng, shape) -> Tensor:
    return Tensor(rng.standard_normal(shape))


def _contract(out: Tensor, probe: Tensor) -> Tensor:
    return (out * probe).sum()


def randomize(store: ParameterStore, rng: np.random.Generator, scale: float = 0.5) -> None:
    """Perturb every parameter so no gate or layer scale sits at its zero/near-zero init."""
    for _, t in store.items():
        t.data = t.data + scale * rng.standard_normal(t.shape)


def check_conv2d(seed: int = 0) -> float:
    rng = _rng(seed)
    x = _leaf(rng, 2, 4, 6, 5)
    dense, dense_b = _leaf(rng, 3, 4, 3, 3), _leaf(rng, 3)
    dw = _leaf(rng, 4, 1, 5, 5)
    grouped = _leaf(rng, 6, 2, 3, 3)
    p1, p2, p3 = _probe(rng, (2, 3, 6, 5)), _probe(rng, (2, 4, 6, 5)), _probe(rng, (2, 6, 6, 5))

    def fn():
        return (_contract(F.conv2d(x, dense, dense_b), p1)
                + _contract(F.conv2d(x, dw, groups=4), p2)
                + _contract(F.conv2d(x, grouped, groups=2), p3))

    return grad_check(fn, [x, dense, dense_b, dw, grouped], EPS)


def check_activations(seed: int = 0) -> float:
    rng = _rng(seed)
    x = _leaf(rng, 3, 7)
    probes = [_probe(rng, (3, 7)) for _ in range(3)]
    return grad_check(lambda: sum((_contract(F.activation(x, k), p)
                                   for k, p in zip(("gelu", "silu", "sigmoid"), probes)), Tensor(0.0)),
                      [x], EPS)


def check_silu_conv(seed: int = 0) -> float:
    """loss = sum(SiLU(conv2d(x, w)))."""
    rng = _rng(seed)
    x, w = _leaf(rng, 1, 2, 5, 5), _leaf(rng, 3, 2, 3, 3)
    return grad_check(lambda: F.silu(F.conv2d(x, w)).sum(), [x, w], EPS)


def check_pooling(seed: int = 0) -> float:
    rng = _rng(seed)
    x = _leaf(rng, 2, 3, 4, 5)
    pa, pm = _probe(rng, (2, 3, 1, 1)), _probe(rng, (2, 3, 1, 1))
    return grad_check(lambda: _contract(F.global_pool(x, "avg"), pa) + _contract(F.global_pool(x, "max"), pm),
                      [x], EPS)


def check_fft(seed: int = 0) -> float:
    rng = _rng(seed)
    worst = 0.0
    for width in (6, 7):
        x = _leaf(rng, 2, 5, width)
        spec = _leaf(rng, 2, 5, width // 2 + 1, 2)
        pf, pi = _probe(rng, (2, 5, width // 2 + 1, 2)), _probe(rng, (2, 5, width))
        worst = max(worst, grad_check(
            lambda: _contract(F.rfft2(x), pf) + _contract(F.irfft2(spec, width), pi), [x, spec], EPS))
    return worst


def check_spectral_filter(seed: int = 0) -> float:
    rng = _rng(seed)
    x = _leaf(rng, 2, 3, 4, 6)
    psi = _leaf(rng, 3, 4, 4, 2)
    p = _probe(rng, (2, 3, 4, 6))
    return grad_check(lambda: _contract(F.spectral_filter(x, psi), p), [x, psi], EPS)


def check_wavelet(seed: int = 0) -> float:
    rng = _rng(seed)
    x = _leaf(rng, 2, 3, 4, 6)
    probes = [_probe(rng, (2, 3, 2, 3)) for _ in range(4)]
    y = _leaf(rng, 2, 3, 4, 6)
    py = _probe(rng, (2, 3, 4, 6))

    def fn():
        bands = wavelet.haar_dwt2(x)
        total = sum((_contract(b, p) for b, p in zip(bands, probes)), Tensor(0.0))
        inner = wavelet.haar_dwt2(y)
        return total + _contract(wavelet.haar_idwt2(wavelet.SubbandSet(*[F.silu(b) for b in inner])), py)

    return grad_check(fn, [x, y], EPS)


def _store(seed: int) -> ParameterStore:
    return ParameterStore(dtype=np.float64, seed=seed)


def check_stem(seed: int = 0) -> float:
    store = _store(seed)
    stem = Stem(store, "stem", 2, 4)
    rng = _rng(seed + 1)
    x = _leaf(rng, 1, 2, 5, 5)
    return grad_check(lambda: stem(x).sum(), dict(store.items()) | {"x": x}, EPS)


def check_fs_block(seed: int = 0) -> float:
    store = _store(seed)
    block = FSBlock(store, "fs", 4)
    rng = _rng(seed + 1)
    randomize(store, rng)
    x = _leaf(rng, 2, 4, 5, 5)
    p = _probe(rng, (2, 4, 5, 5))
    return grad_check(lambda: _contract(block(x), p), dict(store.items()) | {"x": x}, EPS)


def _st_block(seed: int, mixer: str = "gated") -> tuple[STBlock, ParameterStore, np.random.Generator]:
    store = _store(seed)
    block = STBlock(store, "st", 8, 4, 4, Mode(), mixer=mixer)
    rng = _rng(seed + 1)
    randomize(store, rng)
    return block, store, rng


def check_st_context(seed: int = 0) -> float:
    block, store, rng = _st_block(seed)
    x = _leaf(rng, 2, 8, 4, 4)
    p = _probe(rng, (2, 8, 4, 4))
    return grad_check(lambda: _contract(block.context(x), p), dict(store.items()) | {"x": x}, EPS)


def check_gated_channel_interaction(seed: int = 0) -> float:
    block, store, rng = _st_block(seed)
    x = _leaf(rng, 1, 8, 4, 4)
    p = _probe(rng, (1, 8, 4, 4))
    return grad_check(lambda: _contract(block.mixing(x), p), dict(store.items()) | {"x": x}, EPS)


def check_mlp_mixer(seed: int = 0) -> float:
    block, store, rng = _st_block(seed, mixer="mlp")
    x = _leaf(rng, 1, 8, 4, 4)
    p = _probe(rng, (1, 8, 4, 4))
    return grad_check(lambda: _contract(block.mixing(x), p), dict(store.items()) | {"x": x}, EPS)


def check_tdi(seed: int = 0) -> float:
    store = _store(seed)
    tdi = TDI(store, "tdi", 3)
    rng = _rng(seed + 1)
    randomize(store, rng)
    z = _leaf(rng, 2, 4, 3, 4, 4)
    p = _probe(rng, (2, 4, 3, 4, 4))
    return grad_check(lambda: _contract(tdi(z), p), dict(store.items()) | {"z": z}, EPS)


MICRO_CONFIG = ModelConfig(n_s=1, n_t=1, c_s=4, c_z=2, channels=1, height=8, width=8, t_in=2, t_out=2, seed=3)


def check_model_loss(seed: int = 0, variant: str = "full", max_coords: int = 3) -> float:
    """MSE loss of the micro model against random targets, every parameter tensor sampled."""
    model = WaveSFNet(MICRO_CONFIG.replace(variant=variant, seed=seed), dtype=np.float64)
    rng = _rng(seed + 1)
    randomize(model.params, rng, scale=0.3)
    x = _leaf(rng, 1, 2, 1, 8, 8)
    y = rng.random((1, 2, 1, 8, 8))
    params = dict(model.params.items()) | {"input": x}
    return grad_check(lambda: F.mse_loss(model.forward(x), y), params, EPS, max_coords=max_coords, seed=seed)


SUITES: dict[str, Callable[[], float]] = {
    "conv2d": check_conv2d,
    "silu_conv": check_silu_conv,
    "activations": check_activations,
    "global_pool": check_pooling,
    "rfft2_irfft2": check_fft,
    "spectral_filter": check_spectral_filter,
    "wavelet": check_wavelet,
    "stem": check_stem,
    "fs_block": check_fs_block,
    "st_context": check_st_context,
    "gated_channel_interaction": check_gated_channel_interaction,
    "mlp_mixer": check_mlp_mixer,
    "tdi_inject": check_tdi,
    "model_loss": check_model_loss,
}


def run_all(names=None) -> dict[str, float]:
    names = list(SUITES) if names is None else names
    return {name: SUITES[name]() for name in names}
