"""Degradation simulation: spatial binning, percentile normalization,
temporal down-sampling, and photon-count (Poisson) noise.

Noise model: a pixel of normalized intensity I is observed as
``Poisson(b0 * I) / b0`` where b0 is the blank scan factor (photon-count
scale). Expectation equals I; variance is I / b0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .frames import Frame, Sequence

B0_MIN = 10.0
B0_MAX = 1e7
Q_LOW = 0.0035
Q_HIGH = 0.9965


@dataclass(frozen=True)
class NoiseConfig:
    """Photon-noise parameters; the RNG is keyed by (seed, frame_index)."""

    b0: float
    seed: int = 0
    target_psnr: float | None = None

    def __post_init__(self):
        if not (B0_MIN <= self.b0 <= B0_MAX):
            raise ValidationError(f"b0 must be in [{B0_MIN:g}, {B0_MAX:g}], got {self.b0:g}")


@dataclass(frozen=True)
class NormalizationStats:
    """Clipping percentiles pooled over all frames of one sequence."""

    p_low: float
    p_high: float

    def __post_init__(self):
        if not self.p_low < self.p_high:
            raise ValidationError(f"p_low {self.p_low} must be < p_high {self.p_high}")


def bin_spatial(frame: Frame, factor: int) -> Frame:
    """Block-mean binning by an integer factor; dims must divide evenly."""
    if factor < 2:
        raise ValidationError(f"binning factor must be >= 2, got {factor}")
    h, w = frame.height, frame.width
    if h % factor or w % factor:
        raise ValidationError(
            f"dimensions {w}x{h} not divisible by factor {factor}; pre-crop the input"
        )
    px = frame.pixels.astype(np.float64)
    binned = px.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))
    return Frame(binned.astype(np.float32), frame.frame_index)


def _nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    # lower nearest-rank: value at sorted index ceil(q*N) - 1
    n = sorted_values.size
    idx = min(max(math.ceil(q * n) - 1, 0), n - 1)
    return float(sorted_values[idx])


def normalize_sequence(seq: Sequence) -> tuple[Sequence, NormalizationStats]:
    """Clip at the pooled 0.35th/99.65th percentiles, then map to [0, 1].

    Percentiles are computed over the pixel population of all frames
    jointly, using the lower nearest-rank convention.
    """
    pooled = np.sort(np.concatenate([f.pixels.ravel() for f in seq.frames]))
    p_low = _nearest_rank(pooled, Q_LOW)
    p_high = _nearest_rank(pooled, Q_HIGH)
    if not p_low < p_high:
        raise ValidationError(
            f"degenerate sequence: clip percentiles coincide at {p_low:g}"
        )
    scale = 1.0 / (p_high - p_low)
    frames = []
    for f in seq.frames:
        out = (np.clip(f.pixels.astype(np.float64), p_low, p_high) - p_low) * scale
        frames.append(Frame(out.astype(np.float32), f.frame_index))
    return Sequence(tuple(frames), seq.role, seq.native_step), NormalizationStats(p_low, p_high)


def downsample_temporal(seq: Sequence, k: int, keep_trailing: bool = False) -> Sequence:
    """Keep every k-th frame (positions 0, k, 2k, ...).

    With ``keep_trailing`` the last frame is appended even when it falls
    off the stride grid, so ``k >= len(seq)`` degenerates to the leading
    and trailing frames only.
    """
    if k < 1:
        raise ValidationError(f"temporal factor must be >= 1, got {k}")
    kept = list(seq.frames[::k])
    if keep_trailing and (len(seq) - 1) % k != 0:
        kept.append(seq.frames[-1])
    return Sequence(tuple(kept), seq.role, seq.native_step * k)


def add_poisson(frame: Frame, cfg: NoiseConfig) -> Frame:
    """Simulate photon noise on a normalized frame.

    Deterministic: the counter-based generator is keyed by
    (cfg.seed, frame.frame_index) and the frame is drawn in one pass, so
    the realization does not depend on scheduling. Frame-level
    parallelism is safe.
    """
    if cfg.b0 <= 0:
        raise ValidationError(f"b0 must be positive, got {cfg.b0:g}")
    lam = cfg.b0 * np.clip(frame.pixels.astype(np.float64), 0.0, 1.0)
    key = np.array([cfg.seed & 0xFFFFFFFFFFFFFFFF, frame.frame_index & 0xFFFFFFFFFFFFFFFF],
                   dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    counts = rng.poisson(lam)
    return Frame((counts / cfg.b0).astype(np.float32), frame.frame_index)


def _measured_psnr(seq: Sequence, b0: float, seed: int) -> float:
    # one Monte Carlo pass, pooled MSE over every frame of the sequence
    sq_err = 0.0
    n = 0
    for f in seq.frames:
        noisy = add_poisson(f, NoiseConfig(b0=b0, seed=seed))
        d = noisy.pixels.astype(np.float64) - np.clip(f.pixels.astype(np.float64), 0.0, 1.0)
        sq_err += float((d * d).sum())
        n += d.size
    mse = sq_err / n
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def calibrate_b0(seq: Sequence, target_psnr: float, max_value: float = 1.0,
                 verify_seed: int = 0x5EED) -> float:
    """Blank scan factor that yields the requested noisy-vs-clean PSNR.

    Closed form b0 = mean(I) * 10^(PSNR/10) / MAX^2, then one Monte Carlo
    verification pass; if the measurement is off by more than 0.5 dB the
    value is refined by bisection on log10(b0) over [1, 7].
    """
    mean_i = float(np.mean([np.clip(f.pixels, 0.0, 1.0).mean() for f in seq.frames]))
    if mean_i <= 0:
        raise ValidationError("sequence mean intensity must be positive")
    b0 = mean_i * 10.0 ** (target_psnr / 10.0) / (max_value * max_value)
    if not (B0_MIN <= b0 <= B0_MAX):
        lo = 10.0 * math.log10(B0_MIN * max_value * max_value / mean_i)
        hi = 10.0 * math.log10(B0_MAX * max_value * max_value / mean_i)
        raise ValidationError(
            f"target {target_psnr:g} dB is unreachable: needs b0={b0:.3g} outside "
            f"[{B0_MIN:g}, {B0_MAX:g}]; achievable range is [{lo:.2f}, {hi:.2f}] dB"
        )
    if not (10.0 <= target_psnr <= 70.0):
        raise ValidationError(f"target_psnr must be in [10, 70] dB, got {target_psnr:g}")
    measured = _measured_psnr(seq, b0, verify_seed)
    if abs(measured - target_psnr) <= 0.5:
        return b0
    lo_exp, hi_exp = 1.0, 7.0
    for _ in range(40):
        mid = 0.5 * (lo_exp + hi_exp)
        got = _measured_psnr(seq, 10.0 ** mid, verify_seed)
        if abs(got - target_psnr) <= 0.1:
            return 10.0 ** mid
        if got < target_psnr:
            lo_exp = mid
        else:
            hi_exp = mid
    return 10.0 ** (0.5 * (lo_exp + hi_exp))
