"""Adam, learning-rate schedules, the MSE training loop and checkpoints."""

from __future__ import annotations

import io
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from .autodiff import Tensor, no_grad
from .autodiff import functional as F
from .config import ModelConfig, RunConfig
from .data import encode_tensor, make_batches, read_tensor
from .metrics import MetricReport, evaluate
from .model import WaveSFNet

log = logging.getLogger(__name__)

ONECYCLE_WARMUP = Fraction(3, 10)
ONECYCLE_DIV = 25.0
ONECYCLE_FINAL_DIV = 1e4


class TrainingError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


# -- optimizer ---------------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, in place on `params` and `state`.

    All gradients are validated before anything is modified, so a rejected
    step leaves parameters and moments untouched.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name} {p.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for {name}; step rejected")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        update = lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data = (p.data - update).astype(p.dtype)


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    total = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values()))
    if total > max_norm:
        factor = max_norm / (total + 1e-12)
        for name in grads:
            grads[name] = grads[name] * factor
    return total


# -- schedules ---------------------------------------------------------------


def lr_schedule(kind: str, position: float, total: float, lr_max: float) -> float:
    """Learning rate at `position` in [0, total].

    onecycle: linear warmup lr_max/25 -> lr_max over the first 30%, then cosine
    down to lr_max/1e4. cosine: lr_max * (1 + cos(pi * position / total)) / 2.
    constant: lr_max.
    """
    if total <= 0:
        raise ValueError("schedule length must be positive")
    if not 0 <= position <= total:
        raise ValueError(f"schedule position {position} outside [0, {total}]")
    if kind == "constant":
        return lr_max
    if kind == "cosine":
        return max(0.0, lr_max * (1.0 + math.cos(math.pi * position / total)) / 2.0)
    if kind != "onecycle":
        raise ValueError(f"unknown schedule {kind!r}")
    start, end = lr_max / ONECYCLE_DIV, lr_max / ONECYCLE_FINAL_DIV
    pos = Fraction(position) if isinstance(position, int) else Fraction(position).limit_denominator(10 ** 9)
    warm = ONECYCLE_WARMUP * Fraction(total)
    if pos <= warm:
        frac = float(pos / warm)
        return start + (lr_max - start) * frac if frac < 1 else lr_max
    frac = float((pos - warm) / (Fraction(total) - warm))
    return end + (lr_max - end) * (1.0 + math.cos(math.pi * frac)) / 2.0


# -- checkpoints ---------------------------------------------------------------

CKPT_MAGIC = b"WSFC"
CKPT_VERSION = 1


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    adam: AdamState
    step: int
    schedule: dict = field(default_factory=dict)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    """Container: magic, u8 version, u32 manifest length, JSON manifest, then
    one WSFT blob per tensor at the offsets the manifest lists."""
    blobs: list[bytes] = []
    entries = []
    offset = 0

    def add(kind: str, name: str, arr: np.ndarray):
        nonlocal offset
        blob = encode_tensor(arr)
        entries.append({"kind": kind, "name": name, "offset": offset, "length": len(blob)})
        blobs.append(blob)
        offset += len(blob)

    for name, arr in ckpt.params.items():
        add("param", name, arr)
    for name in ckpt.adam.m:
        add("adam_m", name, ckpt.adam.m[name])
        add("adam_v", name, ckpt.adam.v[name])
    manifest = {
        "config": ckpt.config.to_dict(),
        "step": ckpt.step,
        "schedule": ckpt.schedule,
        "adam": {"t": ckpt.adam.t, "beta1": ckpt.adam.beta1, "beta2": ckpt.adam.beta2, "eps": ckpt.adam.eps},
        "tensors": entries,
    }
    raw = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC + struct.pack("<BI", CKPT_VERSION, len(raw)) + raw)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path, expect: ModelConfig | None = None) -> Checkpoint:
    data = Path(path).read_bytes()
    if data[:4] != CKPT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic {data[:4]!r})")
    if len(data) < 9:
        raise CheckpointError(f"{path}: truncated header")
    version, mlen = struct.unpack("<BI", data[4:9])
    if version != CKPT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    try:
        manifest = json.loads(data[9:9 + mlen].decode("utf-8"))
        config = ModelConfig(**manifest["config"])
        entries = manifest["tensors"]
        adam_meta = manifest["adam"]
        step = int(manifest["step"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: corrupt manifest ({exc})") from None
    if expect is not None and config != expect:
        diffs = [k for k, v in expect.to_dict().items() if config.to_dict()[k] != v]
        raise CheckpointError(f"config mismatch on {', '.join(diffs)}")
    body = data[9 + mlen:]
    params, m, v = {}, {}, {}
    for e in entries:
        chunk = body[e["offset"]:e["offset"] + e["length"]]
        if len(chunk) != e["length"]:
            raise CheckpointError(f"{path}: tensor {e['name']} truncated")
        arr = read_tensor(io.BytesIO(chunk))
        {"param": params, "adam_m": m, "adam_v": v}[e["kind"]][e["name"]] = arr
    adam = AdamState(m=m, v=v, t=int(adam_meta["t"]), beta1=adam_meta["beta1"],
                     beta2=adam_meta["beta2"], eps=adam_meta["eps"])
    return Checkpoint(config=config, params=params, adam=adam, step=step, schedule=manifest["schedule"])


def checkpoint_io(direction: str, path, checkpoint: Checkpoint | None = None, expect: ModelConfig | None = None):
    if direction == "save":
        save_checkpoint(path, checkpoint)
        return None
    if direction == "load":
        return load_checkpoint(path, expect)
    raise ValueError(f"direction must be 'save' or 'load', got {direction!r}")


# -- training loop -----------------------------------------------------------


@dataclass
class TrainResult:
    losses: list[float]
    lrs: list[float]
    eval_rows: list[list]
    checkpoint: Checkpoint
    reports: list[MetricReport] = field(default_factory=list)


def _plan(n_sequences: int, cfg: RunConfig) -> tuple[int, int, int]:
    """(steps per epoch, total steps, total epochs)."""
    per_epoch = math.ceil(n_sequences / cfg.batch_size)
    if cfg.steps is not None:
        total = cfg.steps
        epochs = math.ceil(total / per_epoch)
    else:
        epochs = cfg.epochs
        total = epochs * per_epoch
    if total < 1:
        raise ValueError("training needs at least one step")
    return per_epoch, total, epochs


def scheduled_lr(cfg: RunConfig, step: int, per_epoch: int, total_steps: int, total_epochs: int) -> float:
    if cfg.schedule == "cosine":
        return lr_schedule("cosine", step // per_epoch, total_epochs, cfg.lr)
    return lr_schedule(cfg.schedule, step, total_steps, cfg.lr)


def evaluate_model(model: WaveSFNet, dataset: np.ndarray, t_in: int, t_out: int,
                   batch_size: int = 16) -> MetricReport:
    inputs, targets = dataset[:, :t_in], dataset[:, t_in:t_in + t_out]
    pred = model.predict_numpy(inputs, t_out, batch_size)
    return evaluate(pred, targets)


def train_loop(model: WaveSFNet, dataset: np.ndarray, cfg: RunConfig, eval_data: np.ndarray | None = None,
               resume: Checkpoint | None = None,
               on_step: Callable[[int, float], None] | None = None,
               stop_at: int | None = None) -> TrainResult:
    """MSE training with Adam. Deterministic given the model seed, the data
    and `cfg.shuffle_seed`; `resume` continues an interrupted run at its step.
    `stop_at` interrupts the run after that many steps without changing the
    schedule, as a crash would."""
    mcfg = model.config
    t_in, t_out = mcfg.t_in, mcfg.t_out
    per_epoch, total_steps, total_epochs = _plan(len(dataset), cfg)
    names = model.params.names()
    params = {n: model.params[n] for n in names}
    state = AdamState()
    start = 0
    if resume is not None:
        if resume.config != mcfg:
            raise CheckpointError("config mismatch between checkpoint and model")
        model.params.load_state_dict(resume.params)
        state = AdamState(m={k: a.copy() for k, a in resume.adam.m.items()},
                          v={k: a.copy() for k, a in resume.adam.v.items()},
                          t=resume.adam.t, beta1=resume.adam.beta1, beta2=resume.adam.beta2, eps=resume.adam.eps)
        start = resume.step

    end = total_steps if stop_at is None else min(stop_at, total_steps)
    losses, lrs, eval_rows, reports = [], [], [], []
    step = 0
    for epoch in range(total_epochs):
        if step >= end:
            break
        for batch in make_batches(dataset, cfg.batch_size, t_in, t_out, cfg.shuffle_seed, epoch):
            if step >= end:
                break
            if step < start:
                step += 1
                continue
            lr = scheduled_lr(cfg, step, per_epoch, total_steps, total_epochs)
            model.train(np.random.Generator(np.random.PCG64([mcfg.seed, step])))
            model.params.zero_grad()
            x = Tensor(batch.inputs.astype(model.params.dtype))
            pred = model.predict(x, t_out)
            loss = F.mse_loss(pred, batch.targets.astype(model.params.dtype))
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(f"non-finite loss {value} at step {step}")
            loss.backward()
            grads = {n: model.params.grad(n) for n in names}
            if cfg.grad_clip is not None:
                clip_grad_norm(grads, cfg.grad_clip)
            adam_step(params, grads, state, lr)
            losses.append(value)
            lrs.append(lr)
            if on_step is not None:
                on_step(step, value)
            step += 1
            if eval_data is not None and cfg.eval_every > 0 and (step % cfg.eval_every == 0 or step == total_steps):
                report = evaluate_model(model, eval_data, t_in, t_out, cfg.batch_size)
                reports.append(report)
                eval_rows.append(report.row(step))
                log.info("step %d loss %.6f eval mse %.6f", step, value, report.mse)
    model.eval()
    ckpt = Checkpoint(config=mcfg, params=model.params.state_dict(), adam=state, step=step,
                      schedule={"kind": cfg.schedule, "lr_max": cfg.lr, "total_steps": total_steps,
                                "total_epochs": total_epochs})
    return TrainResult(losses=losses, lrs=lrs, eval_rows=eval_rows, checkpoint=ckpt, reports=reports)


def dataset_mse(model: WaveSFNet, dataset: np.ndarray, batch_size: int = 16) -> float:
    """Evaluation-mode MSE over a whole dataset (input/target windows per config)."""
    cfg = model.config
    model.eval()
    total, count = 0.0, 0
    with no_grad():
        for batch in make_batches(dataset, batch_size, cfg.t_in, cfg.t_out):
            pred = model.predict(Tensor(batch.inputs.astype(model.params.dtype)), cfg.t_out).data
            diff = pred.astype(np.float64) - batch.targets
            total += float(np.sum(diff * diff))
            count += diff.size
    return total / count
