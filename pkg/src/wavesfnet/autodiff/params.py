from __future__ import annotations

from collections.abc import Iterator

import numpy as np

from .tensor import Tensor


class ParameterStore:
    """Ordered map from hierarchical names ("encoder.stage1.fs0.dw.weight") to
    learnable tensors. Each tensor carries its gradient in `.grad`.

    Parameters registered with `complex_valued=True` hold (real, imag) pairs in a
    trailing axis of length 2.
    """

    def __init__(self, dtype=np.float32, seed: int = 0):
        self.dtype = np.dtype(dtype)
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self._entries: dict[str, Tensor] = {}
        self._complex: set[str] = set()

    def add(self, name: str, data: np.ndarray, complex_valued: bool = False) -> Tensor:
        if name in self._entries:
            raise KeyError(f"duplicate parameter name {name!r}")
        if complex_valued and data.shape[-1] != 2:
            raise ValueError(f"complex parameter {name!r} needs a trailing (real, imag) axis")
        t = Tensor(np.asarray(data, dtype=self.dtype), requires_grad=True, name=name)
        self._entries[name] = t
        if complex_valued:
            self._complex.add(name)
        return t

    # initializers draw from the store's generator in registration order
    def normal(self, name: str, shape, std: float, mean: float = 0.0) -> Tensor:
        return self.add(name, mean + std * self.rng.standard_normal(shape))

    def zeros(self, name: str, shape) -> Tensor:
        return self.add(name, np.zeros(shape))

    def full(self, name: str, shape, value: float) -> Tensor:
        return self.add(name, np.full(shape, value))

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()

    def names(self) -> list[str]:
        return list(self._entries)

    def is_complex(self, name: str) -> bool:
        return name in self._complex

    def grad(self, name: str) -> np.ndarray:
        t = self._entries[name]
        return t.grad if t.grad is not None else np.zeros_like(t.data)

    def zero_grad(self) -> None:
        for t in self._entries.values():
            t.grad = None

    def count(self) -> int:
        """Number of real scalars (complex entries count twice)."""
        return int(sum(t.data.size for t in self._entries.values()))

    def census(self) -> dict[str, int]:
        return {name: int(t.data.size) for name, t in self._entries.items()}

    def complex_count(self) -> int:
        return int(sum(self._entries[n].data.size for n in self._complex))

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._entries.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._entries) - set(state)
        extra = set(state) - set(self._entries)
        if missing or extra:
            raise KeyError(f"parameter mismatch: missing={sorted(missing)}, unexpected={sorted(extra)}")
        for name, t in self._entries.items():
            arr = np.asarray(state[name])
            if arr.shape != t.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {t.shape}")
            t.data = np.ascontiguousarray(arr.astype(t.dtype))

    def astype(self, dtype) -> None:
        """Cast every parameter in place (used to run gradient checks in float64)."""
        self.dtype = np.dtype(dtype)
        for t in self._entries.values():
            t.data = t.data.astype(dtype)
            t.grad = None
