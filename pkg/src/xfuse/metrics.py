"""Reference implementations of the evaluation metrics (PSNR, AAD, SSIM)
plus box-plot style summaries and the metrics CSV schema."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence as Seq

import numpy as np

from .errors import ValidationError
from .frames import Frame

PSNR_INFINITE = math.inf

METRICS_HEADER = ["case_id", "method", "lr_sep", "hr_ds", "noise_psnr",
                  "frame", "psnr_db", "aad", "ssim"]
SUMMARY_STATS = ["min", "q1", "median", "q3", "max", "mean", "count"]


@dataclass(frozen=True)
class MetricsConfig:
    """Data range and SSIM window parameters (standard 11x11, sigma 1.5)."""

    data_range: float = 1.0
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    ssim_k1: float = 0.01
    ssim_k2: float = 0.03

    def __post_init__(self):
        if self.data_range <= 0:
            raise ValidationError("data_range must be positive")
        if self.ssim_window < 1 or self.ssim_window % 2 == 0:
            raise ValidationError("ssim_window must be odd and positive")


DEFAULT_METRICS = MetricsConfig()


@dataclass(frozen=True)
class MetricsRow:
    """One scored reconstruction under one testing condition."""

    case_id: str
    method: str
    lr_sep: int
    hr_ds: int
    noise_psnr: str
    frame: int
    psnr_db: float
    aad: float
    ssim: float


def _as_pixels(frame_or_array) -> np.ndarray:
    # metrics accept Frames or raw 2-D arrays (kept at their own precision)
    px = frame_or_array.pixels if isinstance(frame_or_array, Frame) else \
        np.asarray(frame_or_array)
    if px.ndim != 2:
        raise ValidationError(f"expected a 2-D image, got ndim={px.ndim}")
    return px


def _check_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    x, y = _as_pixels(a), _as_pixels(b)
    if x.shape != y.shape:
        raise ValidationError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return x, y


def mse(a, b) -> float:
    x, y = _check_pair(a, b)
    d = x.astype(np.float64) - y.astype(np.float64)
    return float(np.mean(d * d))


def psnr(a, b, cfg: MetricsConfig = DEFAULT_METRICS) -> float:
    """10*log10(MAX^2 / MSE); identical frames return the infinite sentinel."""
    err = mse(a, b)
    if err == 0.0:
        return PSNR_INFINITE
    return 10.0 * math.log10(cfg.data_range * cfg.data_range / err)


def aad(a, b) -> float:
    """Mean absolute difference over all pixels (correctly rounded sum)."""
    x, y = _check_pair(a, b)
    d = np.abs(x.astype(np.float64) - y.astype(np.float64))
    return math.fsum(d.ravel().tolist()) / d.size


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """1-D Gaussian taps normalized to unit sum."""
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # separable weighted sum over valid window positions only
    from numpy.lib.stride_tricks import sliding_window_view

    t = sliding_window_view(img, taps.size, axis=1) @ taps
    return sliding_window_view(t, taps.size, axis=0) @ taps


def ssim(a, b, cfg: MetricsConfig = DEFAULT_METRICS) -> float:
    """Mean structural similarity with Gaussian-weighted local moments.

    Only fully valid (non-padded) window positions contribute to the mean.
    """
    x, y = _check_pair(a, b)
    win = cfg.ssim_window
    if x.shape[0] < win or x.shape[1] < win:
        raise ValidationError(
            f"frame {x.shape[1]}x{x.shape[0]} smaller than the {win}x{win} SSIM window"
        )
    x = x.astype(np.float64)
    y = y.astype(np.float64)
    taps = gaussian_window(win, cfg.ssim_sigma)
    c1 = (cfg.ssim_k1 * cfg.data_range) ** 2
    c2 = (cfg.ssim_k2 * cfg.data_range) ** 2

    mu_x = _filter_valid(x, taps)
    mu_y = _filter_valid(y, taps)
    var_x = _filter_valid(x * x, taps) - mu_x * mu_x
    var_y = _filter_valid(y * y, taps) - mu_y * mu_y
    cov = _filter_valid(x * y, taps) - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class SummaryRow:
    """Box-plot statistics of one metric within one group."""

    group: tuple
    metric: str
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float
    count: int


def _five_number(values: np.ndarray) -> tuple[float, float, float, float, float]:
    # quartiles by linear interpolation between closest ranks; infinite
    # PSNR sentinels fall back to closest-rank to avoid inf - inf
    method = "closest_observation" if np.isinf(values).any() else "linear"
    q1, med, q3 = np.percentile(values, [25.0, 50.0, 75.0], method=method)
    return float(values.min()), float(q1), float(med), float(q3), float(values.max())


def summarize(rows: Iterable[MetricsRow], group_keys: Seq[str],
              metrics: Seq[str] = ("psnr_db", "aad", "ssim")) -> list[SummaryRow]:
    """Per-group five-number summary plus mean and count for each metric."""
    rows = list(rows)
    if not rows:
        raise ValidationError("summarize needs at least one row")
    groups: dict[tuple, list[MetricsRow]] = {}
    for row in rows:
        key = tuple(getattr(row, k) for k in group_keys)
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
        members = groups[key]
        for metric in metrics:
            vals = np.array([getattr(r, metric) for r in members], dtype=np.float64)
            lo, q1, med, q3, hi = _five_number(vals)
            out.append(SummaryRow(key, metric, lo, q1, med, q3, hi,
                                  float(vals.mean()), len(members)))
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_metrics_csv(rows: Iterable[MetricsRow], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for r in rows:
            writer.writerow([r.case_id, r.method, r.lr_sep, r.hr_ds, r.noise_psnr,
                             r.frame, _fmt(r.psnr_db), _fmt(r.aad), _fmt(r.ssim)])


def read_metrics_csv(path) -> list[MetricsRow]:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRICS_HEADER:
            raise ValidationError(
                f"{path}: header {reader.fieldnames} != {METRICS_HEADER}"
            )
        for rec in reader:
            rows.append(MetricsRow(
                rec["case_id"], rec["method"], int(rec["lr_sep"]), int(rec["hr_ds"]),
                rec["noise_psnr"], int(rec["frame"]),
                float(rec["psnr_db"]), float(rec["aad"]), float(rec["ssim"]),
            ))
    return rows


def write_summary_csv(rows: Iterable[SummaryRow], group_keys: Seq[str], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(group_keys) + ["metric"] + SUMMARY_STATS)
        for r in rows:
            stats = [r.min, r.q1, r.median, r.q3, r.max, r.mean, r.count]
            writer.writerow([_fmt(v) for v in r.group] + [r.metric] + [_fmt(s) for s in stats])
