"""Toy-scale training loop: Charbonnier loss, Adam, cosine annealing.

Samples are drawn from ground-truth HR sequence directories: the LR
triplet is block-mean binned from the HR frames at a random separation,
the HR pair is taken at random scaled offsets around the target, crops
and flips/rotations augment, and photon noise with a log-uniform blank
scan factor corrupts the LR inputs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch

from .io import FrameSequence, bin_mean, read_sequence
from .model import FusionNet, ModelConfig, SCALE


@dataclass(frozen=True)
class TrainConfig:
    charbonnier_eps: float = 1e-3
    learning_rate: float = 1e-4  # full-scale default; toy runs override
    iterations: int = 200
    lr_separations: tuple[int, ...] = (1, 2, 3)
    hr_offset_range: tuple[int, int] = (1, 20)
    b0_log_range: tuple[float, float] | None = (1.0, 7.0)
    crop_hr: int = 256
    augment_p: float = 0.5
    fixed_sample: bool = False

    def __post_init__(self):
        if self.charbonnier_eps <= 0:
            raise ValueError("charbonnier_eps must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.crop_hr % SCALE:
            raise ValueError("crop_hr must be divisible by 4")


def charbonnier(pred: torch.Tensor, target: torch.Tensor, eps: float = 1e-3) -> torch.Tensor:
    return torch.sqrt((pred - target) ** 2 + eps * eps).mean()


def cosine_lr(base_lr: float, iteration: int, total: int) -> float:
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * iteration / total))


class TripletSampler:
    """Draws (lr_triplet, hr_pair, target) training samples from HR videos."""

    def __init__(self, sequences: list[FrameSequence], cfg: TrainConfig, seed: int):
        if not sequences:
            raise ValueError("empty dataset")
        self.sequences = sequences
        self.cfg = cfg
        self.rng = np.random.default_rng(seed)

    def _crop_and_augment(self, hr_stack: np.ndarray):
        cfg = self.cfg
        _, h, w = hr_stack.shape
        ch = min(cfg.crop_hr, h - h % SCALE, w - w % SCALE)
        ch -= ch % SCALE
        y = int(self.rng.integers(0, h - ch + 1)) if h > ch else 0
        x = int(self.rng.integers(0, w - ch + 1)) if w > ch else 0
        # crop on the LR grid so binning stays block-aligned
        y -= y % SCALE
        x -= x % SCALE
        out = hr_stack[:, y:y + ch, x:x + ch]
        if self.rng.random() < cfg.augment_p:
            out = out[:, :, ::-1]
        if self.rng.random() < cfg.augment_p:
            out = out[:, ::-1, :]
        if self.rng.random() < cfg.augment_p:
            out = np.rot90(out, axes=(1, 2))
        return np.ascontiguousarray(out)

    def _poisson(self, lr_stack: np.ndarray) -> np.ndarray:
        if self.cfg.b0_log_range is None:
            return lr_stack
        lo, hi = self.cfg.b0_log_range
        b0 = 10.0 ** self.rng.uniform(lo, hi)  # one b0 for the whole triplet
        lam = b0 * np.clip(lr_stack, 0.0, 1.0)
        return (self.rng.poisson(lam) / b0).astype(np.float64)

    def draw(self):
        cfg = self.cfg
        seq = self.sequences[int(self.rng.integers(len(self.sequences)))]
        indices = seq.indices
        last = len(indices) - 1
        lo, hi = cfg.hr_offset_range
        feasible = [s for s in cfg.lr_separations if 2 * s <= last]
        if not feasible:
            raise ValueError("sequence too short for the configured separations")
        sep = int(self.rng.choice(feasible))
        # offset factors clamped to what the sequence length supports
        hi_back = max(lo, min(hi, (last - sep) // sep))
        back = sep * int(self.rng.integers(lo, hi_back + 1))
        hi_fwd = max(lo, min(hi, (last - max(sep, back)) // sep))
        fwd = sep * int(self.rng.integers(lo, hi_fwd + 1))
        t_min = max(sep, back)
        t_max = last - max(sep, fwd)
        if t_max < t_min:
            raise ValueError("sequence too short for the configured offsets")
        t = int(self.rng.integers(t_min, t_max + 1))

        picks = [indices[t - sep], indices[t], indices[t + sep],
                 indices[t - back], indices[t + fwd]]
        stack = np.stack([seq[i].astype(np.float64) for i in picks])
        stack = self._crop_and_augment(stack)
        lr_triplet = self._poisson(np.stack([bin_mean(f) for f in stack[:3]]))
        hr_pair = stack[3:]
        target = stack[1]
        return (torch.from_numpy(lr_triplet).float(),
                torch.from_numpy(np.ascontiguousarray(hr_pair)).float(),
                torch.from_numpy(target).float())


def load_dataset(dataset_dir) -> list[FrameSequence]:
    dataset_dir = Path(dataset_dir)
    if (dataset_dir / "manifest.txt").is_file():
        return [read_sequence(dataset_dir)]
    dirs = sorted(p for p in dataset_dir.iterdir() if (p / "manifest.txt").is_file())
    return [read_sequence(p) for p in dirs]


def save_checkpoint(model: FusionNet, path) -> None:
    torch.save({"config": asdict(model.cfg), "state": model.state_dict()}, path)


def load_checkpoint(path) -> FusionNet:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = FusionNet(ModelConfig(**{k: tuple(v) if isinstance(v, list) else v
                                     for k, v in payload["config"].items()}))
    model.load_state_dict(payload["state"])
    model.eval()
    return model


def train_toy(dataset_dir, out_dir, train_cfg: TrainConfig = TrainConfig(),
              model_cfg: ModelConfig = ModelConfig(), seed: int = 0
              ) -> tuple[Path, Path]:
    """Run the toy loop; returns (checkpoint path, loss trace CSV path)."""
    sequences = load_dataset(dataset_dir)
    if not sequences:
        raise ValueError(f"no sequences found under {dataset_dir}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "loss_trace.csv"
    ckpt_path = out_dir / "checkpoint.pt"

    torch.manual_seed(seed)
    sampler = TripletSampler(sequences, train_cfg, seed)
    model = FusionNet(model_cfg)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=train_cfg.learning_rate)

    fixed = sampler.draw() if train_cfg.fixed_sample else None
    trace = []
    for iteration in range(train_cfg.iterations):
        lr_t, hr_p, target = fixed if fixed is not None else sampler.draw()
        lr_now = cosine_lr(train_cfg.learning_rate, iteration, train_cfg.iterations)
        for group in optimizer.param_groups:
            group["lr"] = lr_now
        optimizer.zero_grad()
        estimate, _, _ = model(lr_t.unsqueeze(0), hr_p.unsqueeze(0))
        loss = charbonnier(estimate, target.unsqueeze(0).unsqueeze(0),
                           train_cfg.charbonnier_eps)
        value = float(loss.detach())
        trace.append((iteration, lr_now, value))
        if not math.isfinite(value):
            _write_trace(trace, trace_path)
            raise RuntimeError(f"non-finite loss at iteration {iteration}; trace written")
        loss.backward()
        optimizer.step()

    _write_trace(trace, trace_path)
    model.eval()
    save_checkpoint(model, ckpt_path)
    return ckpt_path, trace_path


def _write_trace(trace, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "learning_rate", "charbonnier_loss"])
        writer.writerows(trace)
