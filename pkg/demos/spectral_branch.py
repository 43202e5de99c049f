"""The frequency branch: a global filter on the rfft2 half-spectrum.

A learnable complex weight per (channel, frequency) gives every output pixel
a view of the whole frame in one step. Here we hand-craft a low-pass weight
and look at the radially averaged power spectrum before and after.

Run: python3 demos/spectral_branch.py
"""

import numpy as np

from wavesfnet.autodiff import Tensor
from wavesfnet.autodiff import functional as F
from wavesfnet.metrics import rapsd

H = W = 32
rng = np.random.default_rng(0)
noise = rng.standard_normal((1, 1, H, W))

fy = np.fft.fftfreq(H)[:, None]
fx = np.fft.rfftfreq(W)[None, :]
keep = (np.hypot(fy, fx) < 0.15).astype(float)
psi = np.stack([keep, np.zeros_like(keep)], axis=-1)[None]  # (C, H, W//2+1, re/im)

smoothed = F.spectral_filter(Tensor(noise), Tensor(psi)).data

before, after = rapsd(noise[0, 0]), rapsd(smoothed[0, 0])
print("radius  power(in)  power(out)")
for k in (1, 2, 4, 6, 8, 12, 16):
    print(f"{k:6d}  {before[k - 1]:9.2f}  {after[k - 1]:10.2f}")

# Unit weights make the branch an identity, which is how psi starts out
# (plus a little noise).
ones = np.zeros_like(psi)
ones[..., 0] = 1
same = F.spectral_filter(Tensor(noise), Tensor(ones)).data
print("identity filter max error:", float(np.max(np.abs(same - noise))))
