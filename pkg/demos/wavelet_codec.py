"""Lossless Haar analysis and what the encoder does with it.

Run: python3 demos/wavelet_codec.py
"""

import numpy as np

from wavesfnet.autodiff import ParameterStore, Tensor
from wavesfnet.codec import Encoder
from wavesfnet.data import generate_moving_shapes
from wavesfnet.wavelet import haar_dwt2, haar_idwt2

frame = generate_moving_shapes(seed=4, n_sequences=1, T=2, H=32, W=32)[0, 0]
bands = haar_dwt2(Tensor(frame))

# A bright square is mostly low-pass; its edges leak into the detail bands.
for name, band in zip(("LL", "HL", "LH", "HH"), bands):
    print(f"{name}: shape {band.shape}, energy {np.sum(band.data.astype(np.float64) ** 2):8.2f}")
print(f"input energy {np.sum(frame.astype(np.float64) ** 2):.2f} (orthonormal, so the four add up)")

back = haar_idwt2(bands).data
print("max reconstruction error:", float(np.max(np.abs(back - frame))))

# The encoder halves resolution per stage without throwing anything away:
# all four subbands are fused back to C_s channels by a pointwise conv.
enc = Encoder(ParameterStore(seed=0), channels=1, width=8, n_stages=2)
code = enc(Tensor(frame[None]))
print("skip features", code.skip.shape, "-> latent", code.latent.shape)
