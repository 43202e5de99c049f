"""Pixel errors, PSNR, SSIM and the radially averaged power spectral density."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


def _check_shapes(pred: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return pred, target


def pixel_errors(pred, target) -> tuple[float, float, float]:
    """(mse, mae, rmse), each a mean over every element."""
    pred, target = _check_shapes(pred, target)
    diff = pred - target
    mse = float(np.mean(diff * diff))
    return mse, float(np.mean(np.abs(diff))), float(np.sqrt(mse))


def psnr(pred, target, max_value: float = 1.0) -> float:
    pred, target = _check_shapes(pred, target)
    mse = float(np.mean((pred - target) ** 2))
    if mse < 1e-10:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(max_value ** 2 / mse))


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable Gaussian over the last two axes, "valid" windows only
    rows = sliding_window_view(img, len(g), axis=-2) @ g
    return sliding_window_view(rows, len(g), axis=-1) @ g


def ssim_map(pred: np.ndarray, target: np.ndarray, data_range: float = 1.0) -> np.ndarray:
    x, y = _check_shapes(pred, target)
    if min(x.shape[-2:]) < SSIM_WINDOW:
        raise ValueError(f"spatial extents {x.shape[-2:]} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    g = _gaussian_window()
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    return ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))


def ssim(pred, target, data_range: float = 1.0) -> float:
    """Mean windowed SSIM (11x11 Gaussian, sigma 1.5) over windows, channels,
    frames and batch; any leading axes are averaged."""
    return float(np.mean(ssim_map(pred, target, data_range)))


def rapsd(frame) -> np.ndarray:
    """Mean power |FFT|^2 on integer-radius annuli k = 1 .. min(H, W) // 2.

    Pixels are assigned to the annulus of their rounded distance from the
    centered DC bin; DC itself (radius 0) is excluded.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2:
        raise ValueError(f"rapsd expects a 2D frame, got shape {frame.shape}")
    H, W = frame.shape
    if min(H, W) < 4:
        raise ValueError(f"rapsd needs extents >= 4, got {H}x{W}")
    power = np.abs(np.fft.fftshift(np.fft.fft2(frame))) ** 2
    radius = _radius_grid(H, W)
    n_bins = min(H, W) // 2
    sums = np.bincount(radius.ravel(), weights=power.ravel(), minlength=n_bins + 1)
    counts = np.bincount(radius.ravel(), minlength=n_bins + 1)
    return sums[1:n_bins + 1] / counts[1:n_bins + 1]


def _radius_grid(H: int, W: int) -> np.ndarray:
    yy, xx = np.indices((H, W))
    return np.rint(np.hypot(yy - H // 2, xx - W // 2)).astype(np.int64)


def annulus_counts(H: int, W: int) -> np.ndarray:
    n_bins = min(H, W) // 2
    return np.bincount(_radius_grid(H, W).ravel(), minlength=n_bins + 1)[1:n_bins + 1]


def mean_rapsd(frames) -> np.ndarray:
    """Average RAPSD over (N, H, W) frames, or (N, C, H, W) with channels averaged."""
    frames = np.asarray(frames, dtype=np.float64)
    frames = frames.reshape((-1,) + frames.shape[-2:])
    return np.mean([rapsd(f) for f in frames], axis=0)


@dataclass
class MetricReport:
    mse: float
    mae: float
    rmse: float
    psnr: float
    ssim: float
    per_frame: dict[str, list[float]] = field(default_factory=dict)

    def row(self, step: int) -> list:
        return [step, self.mse, self.mae, self.rmse, self.psnr, self.ssim]


def evaluate(pred, target, max_value: float = 1.0) -> MetricReport:
    """Aggregate metrics plus per-frame breakdown for (B, T, C, H, W) arrays."""
    pred, target = _check_shapes(pred, target)
    mse, mae, rmse = pixel_errors(pred, target)
    has_ssim = min(pred.shape[-2:]) >= SSIM_WINDOW
    per_frame: dict[str, list[float]] = {k: [] for k in ("mse", "mae", "rmse", "psnr", "ssim")}
    for t in range(pred.shape[1]):
        m, a, r = pixel_errors(pred[:, t], target[:, t])
        per_frame["mse"].append(m)
        per_frame["mae"].append(a)
        per_frame["rmse"].append(r)
        per_frame["psnr"].append(psnr(pred[:, t], target[:, t], max_value))
        per_frame["ssim"].append(ssim(pred[:, t], target[:, t], max_value) if has_ssim else float("nan"))
    return MetricReport(
        mse=mse, mae=mae, rmse=rmse,
        psnr=psnr(pred, target, max_value),
        ssim=ssim(pred, target, max_value) if has_ssim else float("nan"),
        per_frame=per_frame,
    )


METRIC_HEADER = ["step", "mse", "mae", "rmse", "psnr", "ssim"]


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_metric_rows(path: str | Path, rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_HEADER)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_rapsd_csv(path: str | Path, power: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["radius", "power"])
        for k, value in enumerate(power, start=1):
            writer.writerow([k, _fmt(value)])
