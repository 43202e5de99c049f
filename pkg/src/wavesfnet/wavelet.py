"""Orthonormal 2D Haar analysis/synthesis.

For each non-overlapping 2x2 block [[a, b], [c, d]]:

    LL = (a + b + c + d) / 2      HL = (a - b + c - d) / 2
    LH = (a + b - c - d) / 2      HH = (a - b - c + d) / 2

The transform matrix is orthogonal and symmetric, so the synthesis step uses
the same butterfly and each transform's adjoint is the other one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .autodiff import ShapeError, Tensor
from .autodiff.tensor import make_node


@dataclass
class SubbandSet:
    ll: Tensor
    hl: Tensor
    lh: Tensor
    hh: Tensor

    def __post_init__(self):
        shapes = {t.shape for t in self}
        if len(shapes) != 1:
            raise ShapeError(f"subband shapes differ: {sorted(shapes)}")

    def __iter__(self) -> Iterator[Tensor]:
        return iter((self.ll, self.hl, self.lh, self.hh))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.ll.shape

    def energy(self) -> float:
        return float(sum(np.sum(np.square(t.data, dtype=np.float64)) for t in self))


def _analysis(x: np.ndarray) -> tuple[np.ndarray, ...]:
    a = x[..., 0::2, 0::2]
    b = x[..., 0::2, 1::2]
    c = x[..., 1::2, 0::2]
    d = x[..., 1::2, 1::2]
    half = x.dtype.type(0.5)
    s_ab, d_ab = a + b, a - b
    s_cd, d_cd = c + d, c - d
    return ((s_ab + s_cd) * half, (d_ab + d_cd) * half, (s_ab - s_cd) * half, (d_ab - d_cd) * half)


def _synthesis(ll, hl, lh, hh) -> np.ndarray:
    half = ll.dtype.type(0.5)
    shape = ll.shape[:-2] + (2 * ll.shape[-2], 2 * ll.shape[-1])
    out = np.empty(shape, dtype=ll.dtype)
    s1, s2 = ll + lh, hl + hh
    d1, d2 = ll - lh, hl - hh
    out[..., 0::2, 0::2] = (s1 + s2) * half
    out[..., 0::2, 1::2] = (s1 - s2) * half
    out[..., 1::2, 0::2] = (d1 + d2) * half
    out[..., 1::2, 1::2] = (d1 - d2) * half
    return out


def haar_dwt2(x: Tensor) -> SubbandSet:
    """One analysis level over the last two axes of (..., H, W); H and W must be even."""
    H, W = x.shape[-2:]
    if H % 2 or W % 2:
        raise ShapeError(f"odd spatial extent {H}x{W}: Haar analysis needs even extents")
    # a single node produces all four bands; each band is then sliced out
    stacked = np.stack(_analysis(x.data), axis=0)
    node = make_node(stacked, (x,), lambda g: (_synthesis(g[0], g[1], g[2], g[3]),))
    return SubbandSet(*(node[i] for i in range(4)))


def haar_idwt2(s: SubbandSet) -> Tensor:
    """Exact inverse of `haar_dwt2`."""
    ll, hl, lh, hh = tuple(s)
    out = _synthesis(ll.data, hl.data, lh.data, hh.data)
    return make_node(out, (ll, hl, lh, hh), lambda g: _analysis(g))


def dwt_multilevel_extents(H: int, W: int, levels: int) -> list[tuple[int, int]]:
    """Spatial extents after each of `levels` analysis steps; raises if not divisible."""
    if H % (2 ** levels) or W % (2 ** levels):
        raise ShapeError(f"extent {H}x{W} not divisible by 2**{levels}")
    return [(H >> i, W >> i) for i in range(1, levels + 1)]
