"""Normalization and histogramming of backward/forward attention scores
exported per reconstructed frame, independent of any neural runtime.

Scores are grouped by the preceding HR keyframe. Backward scores divide
by the backward score of the record taken at the preceding keyframe
itself (offset 0); forward scores divide, symmetrically, by the forward
score of the record taken at the succeeding keyframe.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ValidationError

ATTENTION_HEADER = ["target", "prev_hr", "next_hr", "backward_raw", "forward_raw"]
DEFAULT_SCORE_BIN_WIDTH = 0.05
DEFAULT_SCORE_MAX = 1.2


@dataclass(frozen=True)
class AttentionRecord:
    target_index: int
    prev_hr_index: int
    next_hr_index: int
    backward_raw: float
    forward_raw: float

    def __post_init__(self):
        if not self.prev_hr_index <= self.target_index <= self.next_hr_index:
            raise ValidationError(
                f"need prev_hr <= target <= next_hr, got "
                f"{self.prev_hr_index}, {self.target_index}, {self.next_hr_index}"
            )
        if self.backward_raw < 0 or self.forward_raw < 0:
            raise ValidationError("raw attention scores must be >= 0")


@dataclass(frozen=True)
class NormalizedAttention:
    target_index: int
    prev_hr_index: int
    next_hr_index: int
    offset: int
    backward_norm: float
    forward_norm: float


@dataclass(frozen=True)
class AttentionHistogram:
    """Counts over (relative offset, normalized score) cells."""

    offsets: np.ndarray      # (n_offsets,) integer bin labels
    score_edges: np.ndarray  # (n_bins + 1,)
    counts: np.ndarray       # (n_offsets, n_bins) non-negative ints
    overflow: int            # records outside either axis range

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.overflow


def _anchors(records: list[AttentionRecord]) -> dict[int, AttentionRecord]:
    return {r.prev_hr_index: r for r in records if r.target_index == r.prev_hr_index}


def normalize_scores(records: Iterable[AttentionRecord]) -> list[NormalizedAttention]:
    """Attach relative offsets and keyframe-anchored normalized scores."""
    records = list(records)
    anchors = _anchors(records)
    groups = {r.prev_hr_index for r in records}
    missing = sorted(g for g in groups if g not in anchors)
    if missing:
        raise ValidationError(f"groups {missing} lack an offset-0 anchor record")
    out = []
    for r in records:
        back_anchor = anchors[r.prev_hr_index]
        if back_anchor.backward_raw <= 0:
            raise ValidationError(
                f"zero backward anchor score for group {r.prev_hr_index}"
            )
        fwd_anchor = anchors.get(r.next_hr_index)
        if fwd_anchor is None:
            raise ValidationError(
                f"no anchor record at succeeding keyframe {r.next_hr_index}"
            )
        if fwd_anchor.forward_raw <= 0:
            raise ValidationError(
                f"zero forward anchor score at keyframe {r.next_hr_index}"
            )
        out.append(NormalizedAttention(
            r.target_index, r.prev_hr_index, r.next_hr_index,
            r.target_index - r.prev_hr_index,
            r.backward_raw / back_anchor.backward_raw,
            r.forward_raw / fwd_anchor.forward_raw,
        ))
    return out


def histogram2d(records: Iterable[NormalizedAttention],
                max_offset: int | None = None,
                score_bin_width: float = DEFAULT_SCORE_BIN_WIDTH,
                score_max: float | None = DEFAULT_SCORE_MAX
                ) -> tuple[AttentionHistogram, AttentionHistogram]:
    """2-D histograms (backward, forward) with an explicit overflow bucket.

    ``score_max=None`` sizes the score axis at the ceiling of the largest
    observed score (at least 1).
    """
    records = list(records)
    if score_bin_width <= 0:
        raise ValidationError("score_bin_width must be positive")
    if max_offset is None:
        max_offset = max((r.offset for r in records), default=0)
    if score_max is None:
        top = max(
            [1.0] + [r.backward_norm for r in records] + [r.forward_norm for r in records]
        )
        score_max = float(math.ceil(top))
    n_bins = int(math.ceil(score_max / score_bin_width))
    if n_bins < 1:
        raise ValidationError("score range must cover at least one bin")
    edges = np.arange(n_bins + 1, dtype=np.float64) * score_bin_width
    offsets = np.arange(max_offset + 1)

    def build(scores):
        counts = np.zeros((offsets.size, n_bins), dtype=np.int64)
        overflow = 0
        for r, s in zip(records, scores):
            j = int(s // score_bin_width)
            if 0 <= r.offset <= max_offset and 0 <= s and j < n_bins:
                counts[r.offset, j] += 1
            else:
                overflow += 1
        return AttentionHistogram(offsets, edges, counts, overflow)

    backward = build([r.backward_norm for r in records])
    forward = build([r.forward_norm for r in records])
    return backward, forward


@dataclass(frozen=True)
class MonotonicityStats:
    """Fraction of adjacent-offset steps moving the expected direction."""

    backward: float  # non-increasing steps
    forward: float   # non-decreasing steps


def monotonicity_stat(records: Iterable[NormalizedAttention]) -> MonotonicityStats:
    """Per-group adjacent-step direction fractions, averaged over groups."""
    groups: dict[int, list[NormalizedAttention]] = {}
    for r in records:
        groups.setdefault(r.prev_hr_index, []).append(r)
    back_fracs, fwd_fracs = [], []
    for members in groups.values():
        members = sorted(members, key=lambda r: r.offset)
        if len(members) < 2:
            continue
        pairs = list(zip(members, members[1:]))
        back_fracs.append(
            sum(b.backward_norm <= a.backward_norm for a, b in pairs) / len(pairs)
        )
        fwd_fracs.append(
            sum(b.forward_norm >= a.forward_norm for a, b in pairs) / len(pairs)
        )
    if not back_fracs:
        raise ValidationError("need at least one group with two or more offsets")
    return MonotonicityStats(float(np.mean(back_fracs)), float(np.mean(fwd_fracs)))


def read_attention_csv(path) -> list[AttentionRecord]:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ATTENTION_HEADER:
            raise ValidationError(f"{path}: header {reader.fieldnames} != {ATTENTION_HEADER}")
        for rec in reader:
            rows.append(AttentionRecord(
                int(rec["target"]), int(rec["prev_hr"]), int(rec["next_hr"]),
                float(rec["backward_raw"]), float(rec["forward_raw"]),
            ))
    return rows


def write_attention_csv(records: Iterable[AttentionRecord], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ATTENTION_HEADER)
        for r in records:
            writer.writerow([r.target_index, r.prev_hr_index, r.next_hr_index,
                             repr(r.backward_raw), repr(r.forward_raw)])


def write_histogram_csv(hist: AttentionHistogram, path) -> None:
    """Counts as a grid: one row per offset, one column per score bin."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["offset"] + [
            f"[{lo:.2f},{hi:.2f})" for lo, hi in zip(hist.score_edges, hist.score_edges[1:])
        ]
        writer.writerow(header)
        for off, row in zip(hist.offsets, hist.counts):
            writer.writerow([int(off)] + [int(c) for c in row])
        writer.writerow(["overflow", hist.overflow] + [""] * (len(header) - 2))
