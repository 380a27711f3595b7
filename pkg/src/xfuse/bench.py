"""Experiment grid runner: builds testing conditions over LR separations,
HR down-sampling factors and noise levels, drives the built-in and
file-based external reconstruction methods over identical samples, scores
them, and measures single-frame wall times.
"""

from __future__ import annotations

import csv
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from . import bayes
from .bicubic import ResampleConfig, upsample_bicubic
from .degrade import NoiseConfig, add_poisson, bin_spatial, calibrate_b0, downsample_temporal
from .errors import ValidationError
from .frames import Frame, Role, Sequence, SequencePair, read_manifest
from .metrics import (DEFAULT_METRICS, MetricsRow, aad, psnr, ssim, summarize,
                      write_metrics_csv, write_summary_csv)

LR_SEPARATIONS = (1, 2, 3)
HR_DOWNSAMPLES = (2, 10, 20, 450)
NOISE_LEVELS = ("none", 20, 30, 40, 50, 60)
SPATIAL_FACTOR = 4

CONDITIONS_HEADER = ["target", "lr_prev", "lr_next", "hr_prev", "hr_next", "keyframe"]
TIMING_HEADER = ["method", "width", "height", "n_runs", "median_s"]
GROUP_KEYS = ("case_id", "method", "lr_sep", "hr_ds", "noise_psnr")


@dataclass(frozen=True)
class GridConfig:
    """One benchmark case: the cross product of testing conditions."""

    case_id: str
    lr_separations: tuple[int, ...] = (1,)
    hr_downsamples: tuple[int, ...] = (20,)
    noise_psnr_levels: tuple = ("none",)
    methods: tuple[str, ...] = ("bicubic", "bayes")
    seed: int = 0

    def __post_init__(self):
        if not (self.lr_separations and self.hr_downsamples
                and self.noise_psnr_levels and self.methods):
            raise ValidationError("grid selections must be non-empty")
        bad = [s for s in self.lr_separations if s not in LR_SEPARATIONS]
        if bad:
            raise ValidationError(f"lr_separations {bad} outside {LR_SEPARATIONS}")
        bad = [k for k in self.hr_downsamples if k not in HR_DOWNSAMPLES]
        if bad:
            raise ValidationError(f"hr_downsamples {bad} outside {HR_DOWNSAMPLES}")
        bad = [n for n in self.noise_psnr_levels if n not in NOISE_LEVELS]
        if bad:
            raise ValidationError(f"noise_psnr_levels {bad} outside {NOISE_LEVELS}")
        for m in self.methods:
            if m not in ("bicubic", "bayes") and not m.startswith("external:"):
                raise ValidationError(
                    f"unknown method '{m}' (expected bicubic, bayes, or external:<dir>)"
                )


@dataclass(frozen=True)
class Condition:
    """One reconstruction target with its input frame indices."""

    target: int
    lr_prev: int
    lr_next: int
    hr_prev: int
    hr_next: int
    keyframe: bool


@dataclass(frozen=True)
class ConditionSet:
    conditions: tuple[Condition, ...]
    skipped: int


@dataclass(frozen=True)
class TimingReport:
    method: str
    width: int
    height: int
    n_runs: int
    median_s: float


def grid_cells(grid: GridConfig) -> list[tuple[int, int, object]]:
    """Deterministic enumeration of (lr_sep, hr_ds, noise) combinations."""
    return [(s, k, n)
            for s in grid.lr_separations
            for k in grid.hr_downsamples
            for n in grid.noise_psnr_levels]


def build_conditions(pair: SequencePair, grid: GridConfig | None = None) -> ConditionSet:
    """Enumerate reconstruction targets for the pair's LR separation.

    A target needs LR neighbors at t +/- separation and HR anchors on
    both sides; boundary targets missing a neighbor are skipped and
    counted. Targets coinciding with an HR keyframe are marked.
    """
    sep = pair.lr_separation
    lr_idx = set(pair.lr.frame_indices)
    hr_idx = sorted(pair.hr.frame_indices)
    conditions = []
    skipped = 0
    for t in pair.lr.frame_indices:
        if (t - sep) not in lr_idx or (t + sep) not in lr_idx:
            skipped += 1
            continue
        prev_candidates = [i for i in hr_idx if i <= t]
        next_candidates = [i for i in hr_idx if i >= t]
        if not prev_candidates or not next_candidates:
            skipped += 1
            continue
        hr_prev, hr_next = prev_candidates[-1], next_candidates[0]
        conditions.append(Condition(
            t, t - sep, t + sep, hr_prev, hr_next,
            keyframe=(hr_prev == t == hr_next),
        ))
    if not conditions:
        raise ValidationError("no valid conditions; sequence too short for this grid")
    return ConditionSet(tuple(conditions), skipped)


def _mix_seed(*parts: int) -> int:
    h = 0x9E3779B97F4A7C15
    for p in parts:
        h = (h ^ (p & 0xFFFFFFFFFFFFFFFF)) * 0xBF58476D1CE4E5B9 % (1 << 64)
    return h


def _noise_seed(base_seed: int, level) -> int:
    return _mix_seed(base_seed, NOISE_LEVELS.index(level))


def make_lr_stream(truth: Sequence, noise_level, seed: int) -> Sequence:
    """Dense LR stream: block-mean binning, plus calibrated photon noise.

    The noise realization depends on (seed, noise level, frame index)
    only, so every method and every grid cell at one level observes the
    identical stream.
    """
    clean = Sequence(
        tuple(bin_spatial(f, SPATIAL_FACTOR) for f in truth.frames),
        Role.LR, truth.native_step,
    )
    if noise_level == "none":
        return clean
    b0 = calibrate_b0(clean, float(noise_level))
    cfg = NoiseConfig(b0=b0, seed=_noise_seed(seed, noise_level), target_psnr=float(noise_level))
    return Sequence(
        tuple(add_poisson(f, cfg) for f in clean.frames), Role.LR, clean.native_step,
    )


def _run_bicubic(pair: SequencePair, cond: Condition) -> Frame:
    return upsample_bicubic(pair.lr.frame_at(cond.target),
                            ResampleConfig(factor=pair.spatial_factor))


def _run_bayes(pair: SequencePair, cond: Condition, seed: int) -> Frame:
    """Bayesian fusion on one condition.

    The two companion LR frames are taken at the HR anchor times (the
    fusion pairs HR and LR frames from the same instants); at a keyframe
    target the co-timed HR frame serves as both anchors at unit distance.
    """
    lr_ref = pair.lr.frame_at(cond.target)
    lr_p = pair.lr.frame_at(cond.hr_prev)
    lr_n = pair.lr.frame_at(cond.hr_next)
    hr_p = pair.hr.frame_at(cond.hr_prev)
    hr_n = pair.hr.frame_at(cond.hr_next)
    d_back = max(cond.target - cond.hr_prev, 1)
    d_fwd = max(cond.hr_next - cond.target, 1)

    series = np.column_stack([
        lr_p.pixels.astype(np.float64).ravel(),
        lr_ref.pixels.astype(np.float64).ravel(),
        lr_n.pixels.astype(np.float64).ravel(),
    ])
    k = bayes.cluster_count(pair.lr.width, pair.lr.height)
    model = bayes.fit_clusters(series, k, seed=_mix_seed(seed, cond.target))
    if cond.hr_prev == cond.hr_next:
        deg = bayes.calibrate_degradation(hr_p, lr_p)
    else:
        deg = bayes.calibrate_degradation(hr_p, lr_p, more_pairs=((hr_n, lr_n),))
    return bayes.fuse_frame(lr_p, lr_ref, lr_n, hr_p, hr_n, d_back, d_fwd, model, deg)


def _external_index(method: str) -> dict[int, Frame]:
    recon_dir = method.split(":", 1)[1]
    seq = read_manifest(recon_dir)
    return {f.frame_index: f for f in seq.frames}


def _noise_sort_key(level) -> tuple:
    return (0, 0) if level == "none" else (1, int(level))


def write_conditions_csv(cset: ConditionSet, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CONDITIONS_HEADER)
        for c in cset.conditions:
            writer.writerow([c.target, c.lr_prev, c.lr_next, c.hr_prev, c.hr_next,
                             int(c.keyframe)])


def read_conditions_csv(path) -> ConditionSet:
    conditions = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CONDITIONS_HEADER:
            raise ValidationError(f"{path}: header {reader.fieldnames} != {CONDITIONS_HEADER}")
        for rec in reader:
            conditions.append(Condition(
                int(rec["target"]), int(rec["lr_prev"]), int(rec["lr_next"]),
                int(rec["hr_prev"]), int(rec["hr_next"]), bool(int(rec["keyframe"])),
            ))
    return ConditionSet(tuple(conditions), 0)


def run_grid(grid: GridConfig, data_dir, out_dir,
             export_inputs: bool = False) -> list[MetricsRow]:
    """Score every method over every grid cell against the ground truth.

    ``data_dir`` holds the normalized HR ground-truth sequence. Writes
    metrics.csv, summary.csv, and per-cell conditions CSVs (plus the
    degraded input sequences when ``export_inputs`` is set) into
    ``out_dir``. Rows are ordered by condition, then method, then frame.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    truth = read_manifest(data_dir)
    by_index = {f.frame_index: f for f in truth.frames}

    external: dict[str, dict[int, Frame]] = {}
    for m in grid.methods:
        if m.startswith("external:"):
            external[m] = _external_index(m)

    lr_cache: dict = {}
    rows: list[MetricsRow] = []
    missing_report: list[str] = []
    for sep, k, noise in sorted(grid_cells(grid),
                                key=lambda c: (c[0], c[1], _noise_sort_key(c[2]))):
        if noise not in lr_cache:
            lr_cache[noise] = make_lr_stream(truth, noise, grid.seed)
        lr_seq = lr_cache[noise]
        hr_seq = downsample_temporal(truth, k, keep_trailing=True)
        pair = SequencePair(lr_seq, hr_seq, lr_separation=sep, hr_downsample=k,
                            spatial_factor=SPATIAL_FACTOR)
        cset = build_conditions(pair, grid)
        cell_tag = f"sep{sep}_ds{k}_noise{noise}"
        write_conditions_csv(cset, out_dir / f"conditions_{cell_tag}.csv")
        if export_inputs:
            from .frames import write_manifest
            cell_dir = out_dir / "inputs" / cell_tag
            write_manifest(lr_seq, cell_dir / "lr")
            write_manifest(hr_seq, cell_dir / "hr")

        for method in sorted(grid.methods):
            for cond in cset.conditions:
                if method == "bicubic":
                    recon = _run_bicubic(pair, cond)
                elif method == "bayes":
                    recon = _run_bayes(pair, cond, grid.seed)
                else:
                    recon = external[method].get(cond.target)
                    if recon is None:
                        missing_report.append(
                            f"{method}: no reconstruction for frame {cond.target} ({cell_tag})"
                        )
                        continue
                ref = by_index[cond.target]
                rows.append(MetricsRow(
                    grid.case_id, method, sep, k, str(noise), cond.target,
                    psnr(recon, ref, DEFAULT_METRICS), aad(recon, ref),
                    ssim(recon, ref, DEFAULT_METRICS),
                ))

    rows.sort(key=lambda r: (r.lr_sep, r.hr_ds, _noise_sort_key(r.noise_psnr),
                             r.method, r.frame))
    write_metrics_csv(rows, out_dir / "metrics.csv")
    write_summary_csv(summarize(rows, GROUP_KEYS), GROUP_KEYS, out_dir / "summary.csv")
    for line in missing_report:
        print(line, file=sys.stderr)
    return rows


def _timing_fixture(lr_width: int = 100, lr_height: int = 256, seed: int = 0):
    """Synthetic single-condition inputs at benchmark geometry."""
    rng = np.random.default_rng(seed)
    hr_shape = (lr_height * SPATIAL_FACTOR, lr_width * SPATIAL_FACTOR)
    yy, xx = np.mgrid[0:hr_shape[0], 0:hr_shape[1]].astype(np.float64)
    base = 0.5 + 0.2 * np.sin(xx / 37.0) * np.cos(yy / 23.0)
    drift = 0.05 * np.sin(xx / 11.0)
    hr_frames = [Frame((base + i * drift * 0.1
                        + 0.02 * rng.standard_normal(hr_shape)).clip(0, 1).astype(np.float32), i)
                 for i in range(3)]
    lr_frames = [bin_spatial(f, SPATIAL_FACTOR) for f in hr_frames]
    return lr_frames, hr_frames


def time_method(method: str, n_runs: int = 100,
                lr_width: int = 100, lr_height: int = 256, seed: int = 0) -> TimingReport:
    """Median wall time of one single-frame reconstruction.

    Inputs are prepared up front so timing excludes I/O and fixture
    setup. ``external:<command>`` times a full shell invocation per run
    (process startup included; reported as measured).
    """
    if n_runs < 1:
        raise ValidationError(f"n_runs must be >= 1, got {n_runs}")
    lr_frames, hr_frames = _timing_fixture(lr_width, lr_height, seed)
    lr_p, lr_ref, lr_n = lr_frames
    hr_p, _, hr_n = hr_frames

    if method == "bicubic":
        def work():
            upsample_bicubic(lr_ref, ResampleConfig(factor=SPATIAL_FACTOR))
    elif method == "bayes":
        series = np.column_stack([f.pixels.astype(np.float64).ravel() for f in lr_frames])
        k = bayes.cluster_count(lr_width, lr_height)

        def work():
            model = bayes.fit_clusters(series, k, seed=seed)
            deg = bayes.calibrate_degradation(hr_p, lr_p, more_pairs=((hr_n, lr_n),))
            bayes.fuse_frame(lr_p, lr_ref, lr_n, hr_p, hr_n, 1, 1, model, deg)
    elif method.startswith("external:"):
        import shlex
        import subprocess
        argv = shlex.split(method.split(":", 1)[1])

        def work():
            subprocess.run(argv, check=True, capture_output=True)
    else:
        raise ValidationError(f"unknown timing method '{method}'")

    samples = []
    for _ in range(n_runs):
        t0 = time.perf_counter()
        work()
        samples.append(time.perf_counter() - t0)
    return TimingReport(method, lr_width * SPATIAL_FACTOR, lr_height * SPATIAL_FACTOR,
                        n_runs, float(np.median(samples)))


def write_timing_csv(reports: Iterable[TimingReport], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMING_HEADER)
        for r in reports:
            writer.writerow([r.method, r.width, r.height, r.n_runs,
                             repr(r.median_s)])
