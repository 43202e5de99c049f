"""Synthetic moving-square sequences, the WSFT tensor file format, and batching.

WSFT layout (all integers little-endian)::

    b"WSFT" | version u8 (=1) | dtype u8 (1=float32, 2=float64) | rank u8
    | rank x u32 dims | row-major payload
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np

MAGIC = b"WSFT"
VERSION = 1
_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_FOR = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}


class WsftError(ValueError):
    pass


class BadMagicError(WsftError):
    pass


class UnsupportedVersionError(WsftError):
    pass


class UnsupportedDtypeError(WsftError):
    pass


class TruncatedPayloadError(WsftError):
    pass


# -- tensor files --------------------------------------------------------------


def encode_tensor(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    code = _CODE_FOR.get(array.dtype)
    if code is None:
        raise UnsupportedDtypeError(f"cannot store dtype {array.dtype}; use float32 or float64")
    if array.ndim < 1 or array.ndim > 255:
        raise WsftError(f"rank {array.ndim} out of range")
    if not np.all(np.isfinite(array)):
        raise WsftError("refusing to save a tensor with non-finite values")
    header = MAGIC + struct.pack("<BBB", VERSION, code, array.ndim)
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    return header + np.ascontiguousarray(array, dtype=_DTYPE_CODES[code]).tobytes()


def read_tensor(stream: BinaryIO) -> np.ndarray:
    head = stream.read(7)
    if len(head) < 4 or head[:4] != MAGIC:
        raise BadMagicError(f"bad magic {head[:4]!r}, expected {MAGIC!r}")
    if len(head) < 7:
        raise TruncatedPayloadError("header ends before rank field")
    version, code, rank = struct.unpack("<BBB", head[4:7])
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported WSFT version {version}")
    if code not in _DTYPE_CODES:
        raise UnsupportedDtypeError(f"unsupported dtype code {code}")
    raw_dims = stream.read(4 * rank)
    if len(raw_dims) < 4 * rank:
        raise TruncatedPayloadError("header ends inside the dimension list")
    dims = struct.unpack(f"<{rank}I", raw_dims)
    dtype = _DTYPE_CODES[code]
    nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    payload = stream.read(nbytes)
    if len(payload) < nbytes:
        raise TruncatedPayloadError(f"payload has {len(payload)} bytes, header promises {nbytes}")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))


def save_tensor(path: str | Path, array: np.ndarray) -> None:
    Path(path).write_bytes(encode_tensor(array))


def load_tensor(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_tensor(fh)


def tensor_file_io(direction: str, path, tensor=None):
    if direction == "save":
        save_tensor(path, tensor)
        return None
    if direction == "load":
        return load_tensor(path)
    raise ValueError(f"direction must be 'save' or 'load', got {direction!r}")


# -- synthetic sequences -------------------------------------------------------


def bounce_step(pos: tuple[int, int], vel: tuple[int, int], size: int, height: int, width: int):
    """Advance one object by one frame with elastic wall reflection.

    Positions are (x, y) of the top-left corner, velocities (vx, vy); a move
    that would leave the frame flips that velocity component instead.
    """
    (x, y), (vx, vy) = pos, vel
    limits = (width - size, height - size)
    new, new_v = [], []
    for p, v, hi in ((x, vx, limits[0]), (y, vy, limits[1])):
        if not 0 <= p + v <= hi:
            v = -v
        new.append(min(max(p + v, 0), hi))
        new_v.append(v)
    return (new[0], new[1]), (new_v[0], new_v[1])


def generate_moving_shapes(seed: int, n_sequences: int, T: int, H: int, W: int,
                           n_objects: int = 2, object_size: int | None = None,
                           max_speed: int = 2) -> np.ndarray:
    """Bright squares (value 1 on 0) bouncing inside an H x W frame.

    Returns float32 (n_sequences, T, 1, H, W). Velocities are nonzero integers
    in [-max_speed, max_speed] per axis; overlapping squares saturate at 1.
    """
    size = max(2, min(H, W) // 4) if object_size is None else object_size
    if size < 1 or size >= min(H, W):
        raise ValueError(f"object size {size} must be in [1, {min(H, W)})")
    if T < 2:
        raise ValueError("sequences need at least two frames")
    if n_sequences < 1 or n_objects < 0 or max_speed < 1:
        raise ValueError("degenerate generator settings")
    rng = np.random.Generator(np.random.PCG64(seed))
    out = np.zeros((n_sequences, T, 1, H, W), dtype=np.float32)
    speeds = np.array([s for s in range(-max_speed, max_speed + 1) if s != 0])
    for n in range(n_sequences):
        objects = []
        for _ in range(n_objects):
            pos = (int(rng.integers(0, W - size + 1)), int(rng.integers(0, H - size + 1)))
            vel = (int(rng.choice(speeds)), int(rng.choice(speeds)))
            objects.append((pos, vel))
        for t in range(T):
            frame = out[n, t, 0]
            for k, (pos, vel) in enumerate(objects):
                x, y = pos
                frame[y:y + size, x:x + size] = 1.0
                objects[k] = bounce_step(pos, vel, size, H, W)
    return out


# -- batching ----------------------------------------------------------------


@dataclass
class SequenceBatch:
    inputs: np.ndarray   # (B, T_in, C, H, W)
    targets: np.ndarray  # (B, T_out, C, H, W)
    indices: np.ndarray

    def __len__(self) -> int:
        return len(self.inputs)


def split_windows(sequences: np.ndarray, t_in: int, t_out: int) -> tuple[np.ndarray, np.ndarray]:
    T = sequences.shape[1]
    if t_in + t_out > T:
        raise ValueError(f"window T_in + T_out = {t_in + t_out} exceeds sequence length {T}")
    return sequences[:, :t_in], sequences[:, t_in:t_in + t_out]


def epoch_order(n: int, shuffle_seed: int | None, epoch: int = 0) -> np.ndarray:
    if shuffle_seed is None:
        return np.arange(n)
    rng = np.random.Generator(np.random.PCG64([shuffle_seed, epoch]))
    return rng.permutation(n)


def make_batches(dataset: np.ndarray, batch_size: int, t_in: int, t_out: int,
                 shuffle_seed: int | None = None, epoch: int = 0) -> Iterator[SequenceBatch]:
    """Yield input/target windows; the final partial batch is kept.

    The order is a pure function of (shuffle_seed, epoch); `None` keeps the
    stored order.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    inputs, targets = split_windows(dataset, t_in, t_out)
    order = epoch_order(len(dataset), shuffle_seed, epoch)
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        yield SequenceBatch(inputs[idx], targets[idx], idx)


def load_split(data_dir: str | Path, split: str) -> np.ndarray:
    """Read `<data_dir>/<split>.wsft`, expected shape (N, T, C, H, W)."""
    arr = load_tensor(Path(data_dir) / f"{split}.wsft")
    if arr.ndim != 5:
        raise WsftError(f"{split}.wsft must have rank 5 (N, T, C, H, W), got shape {arr.shape}")
    return arr.astype(np.float32)
