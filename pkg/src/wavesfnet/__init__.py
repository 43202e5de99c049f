"""Wavelet codec + spatial/frequency gated translator for frame prediction,
on a small numpy autodiff engine."""

from .config import PRESETS, VARIANTS, ModelConfig, RunConfig
from .model import WaveSFNet, build_model, count_params_flops

__all__ = ["PRESETS", "VARIANTS", "ModelConfig", "RunConfig", "WaveSFNet", "build_model", "count_params_flops"]
__version__ = "0.1.0"
