"""Central finite-difference verification of recorded gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import GraphError, Tensor


def relative_error(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def numerical_gradient(fn: Callable[[], Tensor], t: Tensor, eps: float = 1e-5,
                       coords: Sequence[tuple] | None = None) -> np.ndarray:
    """(f(x + eps) - f(x - eps)) / 2eps per coordinate of `t`, others held fixed."""
    grad = np.zeros_like(t.data, dtype=np.float64)
    if coords is None:
        coords = list(np.ndindex(t.shape))
    for idx in coords:
        orig = t.data[idx]
        t.data[idx] = orig + eps
        fp = _scalar(fn())
        t.data[idx] = orig - eps
        fm = _scalar(fn())
        t.data[idx] = orig
        grad[idx] = (fp - fm) / (2.0 * eps)
    return grad


def _scalar(out) -> float:
    if isinstance(out, Tensor):
        if out.data.size != 1:
            raise GraphError(f"gradient check needs a scalar function, got shape {out.shape}")
        return float(out.data.reshape(-1)[0])
    return float(out)


def grad_check(fn: Callable[[], Tensor], params: Sequence[Tensor] | dict, eps: float = 1e-5,
               max_coords: int | None = None, seed: int = 0, analytic: dict | None = None) -> float:
    """Max relative error between recorded and finite-difference gradients.

    `fn` rebuilds the graph from the current parameter values and returns a
    scalar tensor. `params` may be a list of tensors or a name->tensor map.
    With `max_coords`, that many randomly chosen coordinates per tensor are
    checked instead of all of them. `analytic` overrides the recorded
    gradients (name or index -> array), which the tests use to corrupt them.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    items = list(params.items()) if isinstance(params, dict) else list(enumerate(params))
    for _, t in items:
        t.grad = None
    out = fn()
    if out.data.size != 1:
        raise GraphError(f"gradient check needs a scalar function, got shape {out.shape}")
    out.backward()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for key, t in items:
        recorded = t.grad if t.grad is not None else np.zeros_like(t.data)
        if analytic is not None and key in analytic:
            recorded = analytic[key]
        coords = list(np.ndindex(t.shape))
        if max_coords is not None and len(coords) > max_coords:
            pick = rng.choice(len(coords), size=max_coords, replace=False)
            coords = [coords[i] for i in sorted(pick)]
        numeric = numerical_gradient(fn, t, eps, coords)
        sel = tuple(np.array(c) for c in zip(*coords))
        err = relative_error(np.asarray(recorded)[sel], numeric[sel])
        worst = max(worst, float(err.max(initial=0.0)))
    return worst
