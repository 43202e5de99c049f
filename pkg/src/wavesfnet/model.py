"""Full encoder -> translator -> decoder network, rollout, and cost accounting."""

from __future__ import annotations

import math

import numpy as np

from .autodiff import ParameterStore, ShapeError, Tensor, concat, no_grad, reshape
from .codec import Decoder, EncodedFrame, Encoder
from .config import ModelConfig
from .layers import Mode
from .translator import Translator


class WaveSFNet:
    """Maps (B, T_in, C, H, W) input frames to (B, T_in, C, H, W) predictions.

    Parameters live in `self.params`; initialization is a pure function of
    `config.seed` (and `dtype`).
    """

    def __init__(self, config: ModelConfig, dtype=np.float32):
        self.config = config
        self.mode = Mode()
        self.params = ParameterStore(dtype=dtype, seed=config.seed)
        v = config.variant
        use_wavelet = v != "conv_codec"
        h, w = config.latent_hw
        self.encoder = Encoder(self.params, config.channels, config.c_s, config.n_s, use_wavelet)
        self.translator = Translator(
            self.params, config.c_s, config.c_z, config.t_in, config.n_t, h, w, self.mode,
            use_tdi=v != "no_tdi",
            spatial=v != "frequency_only",
            frequency=v != "spatial_only",
            mixer="mlp" if v == "mlp_mixer" else "gated",
            droppath_rate=config.droppath_rate,
        )
        self.decoder = Decoder(self.params, config.channels, config.c_s, config.n_s, use_wavelet)
        self.forward_calls = 0

    # -- mode ---------------------------------------------------------------
    def train(self, rng: np.random.Generator | None = None) -> None:
        self.mode.training = True
        self.mode.rng = rng

    def eval(self) -> None:
        self.mode.training = False
        self.mode.rng = None

    # -- forward ------------------------------------------------------------
    def encode(self, x: Tensor) -> EncodedFrame:
        B, T = x.shape[:2]
        return self.encoder(reshape(x, (B * T,) + x.shape[2:]))

    def forward(self, x) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=self.params.dtype))
        cfg = self.config
        expected = (cfg.t_in,) + cfg.frame_shape
        if x.ndim != 5 or x.shape[1:] != expected:
            raise ShapeError(f"expected input (B, {', '.join(map(str, expected))}), got {x.shape}")
        self.forward_calls += 1
        B, T = x.shape[:2]
        enc = self.encode(x)
        latent = reshape(enc.latent, (B, T) + enc.latent.shape[1:])
        q = self.translator(latent)
        frames = self.decoder(reshape(q, (B * T,) + q.shape[2:]), enc.skip)
        return reshape(frames, (B, T) + frames.shape[1:])

    __call__ = forward

    def predict(self, x, t_out: int | None = None) -> Tensor:
        """Predict `t_out` frames: truncate a single pass, or roll out by feeding
        each predicted window back as the next input."""
        t_out = self.config.t_out if t_out is None else t_out
        if t_out < 1:
            raise ValueError(f"t_out must be >= 1, got {t_out}")
        chunks = []
        produced = 0
        current = x
        while produced < t_out:
            current = self.forward(current)
            chunks.append(current)
            produced += current.shape[1]
        out = chunks[0] if len(chunks) == 1 else concat(chunks, axis=1)
        return out if out.shape[1] == t_out else out[:, :t_out]

    def predict_numpy(self, x: np.ndarray, t_out: int | None = None, batch_size: int = 8) -> np.ndarray:
        """Evaluation-mode prediction without graph recording, in batches."""
        self.eval()
        outs = []
        with no_grad():
            for start in range(0, len(x), batch_size):
                chunk = Tensor(np.asarray(x[start:start + batch_size], dtype=self.params.dtype))
                outs.append(self.predict(chunk, t_out).data)
        return np.concatenate(outs, axis=0)

    # -- accounting ---------------------------------------------------------
    def parameter_count(self) -> int:
        return self.params.count()

    def macs(self) -> int:
        """Multiply-accumulate estimate for one forward on a single sequence."""
        cfg = self.config
        frames = cfg.t_in
        return (frames * self.encoder.macs(cfg.height, cfg.width)
                + self.translator.macs()
                + frames * self.decoder.macs(cfg.height, cfg.width))


def build_model(config: ModelConfig, dtype=np.float32) -> WaveSFNet:
    return WaveSFNet(config, dtype=dtype)


def rollout_passes(t_in: int, t_out: int) -> int:
    return max(1, math.ceil(t_out / t_in))


def count_params_flops(config: ModelConfig) -> tuple[int, int]:
    """(parameter count, MACs per forward of one sequence)."""
    model = WaveSFNet(config)
    return model.parameter_count(), model.macs()


def psi_census(config: ModelConfig) -> int:
    """Real scalars held by the spectral weights across all ST blocks."""
    h, w = config.latent_hw
    return config.n_t * config.c_t * h * (w // 2 + 1) * 2


def variant_inventory(model: WaveSFNet) -> dict:
    names = model.params.names()
    kernels_9 = [n for n in names if model.params[n].ndim == 4 and model.params[n].shape[-2:] == (9, 9)]
    return {
        "variant": model.config.variant,
        "params": model.parameter_count(),
        "complex_params": model.params.complex_count(),
        "kernels_9x9": len(kernels_9),
        "has_tdi_gate": any(n.endswith("tdi.gate") for n in names),
        "tensors": len(names),
    }
