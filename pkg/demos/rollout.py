"""Predicting further than the input window.

One forward maps T_in frames to T_in frames. Shorter horizons keep the first
frames of that pass; longer ones feed each predicted window back in.

Run: python3 demos/rollout.py
"""

import numpy as np

from wavesfnet.autodiff import Tensor
from wavesfnet.config import ModelConfig
from wavesfnet.model import WaveSFNet

for t_in, t_out in ((10, 10), (12, 4), (10, 20), (4, 9)):
    cfg = ModelConfig(n_s=1, n_t=1, c_s=4, c_z=2, height=8, width=8, t_in=t_in, t_out=t_out)
    model = WaveSFNet(cfg)
    x = np.random.default_rng(0).random((1, t_in, 1, 8, 8)).astype(np.float32)
    y = model.predict(Tensor(x))
    print(f"T_in={t_in:2d} T_out={t_out:2d}: {model.forward_calls} forward pass(es), output {y.shape}")
