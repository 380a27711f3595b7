"""Inference over a benchmark condition list, exporting reconstructions
in the sequence-directory format plus the attention-score CSV."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .io import (Condition, read_conditions, read_sequence, write_attention_csv,
                 write_sequence)
from .model import FusionNet


def reconstruct(model: FusionNet, lr_seq, hr_seq, cond: Condition):
    """One condition -> (estimate array, backward score, forward score)."""
    lr_t = torch.from_numpy(np.stack([
        lr_seq[cond.lr_prev], lr_seq[cond.target], lr_seq[cond.lr_next],
    ])).float().unsqueeze(0)
    hr_p = torch.from_numpy(np.stack([
        hr_seq[cond.hr_prev], hr_seq[cond.hr_next],
    ])).float().unsqueeze(0)
    with torch.no_grad():
        estimate, backward, forward = model(lr_t, hr_p)
    return (estimate[0, 0].numpy().astype(np.float32),
            float(backward[0]), float(forward[0]))


def export_run(model: FusionNet, lr_dir, hr_dir, conditions_csv,
               recon_dir, attention_csv) -> int:
    """Reconstruct every condition target; returns the number of frames."""
    lr_seq = read_sequence(lr_dir)
    hr_seq = read_sequence(hr_dir)
    conditions = read_conditions(conditions_csv)
    if not conditions:
        raise ValueError(f"{conditions_csv}: no conditions")
    missing = [c.target for c in conditions
               if c.lr_prev not in lr_seq.frames or c.lr_next not in lr_seq.frames
               or c.target not in lr_seq.frames
               or c.hr_prev not in hr_seq.frames or c.hr_next not in hr_seq.frames]
    if missing:
        raise ValueError(f"conditions reference unavailable frames: {missing[:5]}")

    model.eval()
    frames: dict[int, np.ndarray] = {}
    rows = []
    for cond in conditions:
        estimate, backward, forward = reconstruct(model, lr_seq, hr_seq, cond)
        frames[cond.target] = estimate
        rows.append((cond.target, cond.hr_prev, cond.hr_next, backward, forward))

    write_sequence(frames, recon_dir, role="RECON", native_step=lr_seq.native_step)
    write_attention_csv(rows, Path(attention_csv))
    return len(frames)
