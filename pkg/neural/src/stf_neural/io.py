"""Interchange-format I/O shared with the benchmark toolkit.

Frame files are the XFR1 layout: magic "XFR1", uint32-LE width, height,
dtype code 0 (float32 LE), then row-major float32 pixels. A sequence
directory holds manifest.txt ("key: value" header lines, then one
"frame: <index> <file>" line per frame) plus the frame files. Condition
lists and attention scores travel as CSV.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"XFR1"
_HEADER = struct.Struct("<4sIII")

CONDITIONS_HEADER = ["target", "lr_prev", "lr_next", "hr_prev", "hr_next", "keyframe"]
ATTENTION_HEADER = ["target", "prev_hr", "next_hr", "backward_raw", "forward_raw"]


def read_frame(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, width, height, dtype = _HEADER.unpack_from(raw)
    if magic != MAGIC or dtype != 0:
        raise ValueError(f"{path}: not an XFR1 float32 frame")
    payload = raw[_HEADER.size:]
    if len(payload) != width * height * 4:
        raise ValueError(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype="<f4").reshape(height, width).copy()


def write_frame(pixels: np.ndarray, path) -> None:
    pixels = np.ascontiguousarray(pixels, dtype=np.float32)
    h, w = pixels.shape
    Path(path).write_bytes(_HEADER.pack(MAGIC, w, h, 0) + pixels.astype("<f4").tobytes())


@dataclass
class FrameSequence:
    """Frames indexed on the master timeline."""

    frames: dict[int, np.ndarray]
    role: str
    native_step: int

    @property
    def indices(self) -> list[int]:
        return sorted(self.frames)

    def __getitem__(self, index: int) -> np.ndarray:
        return self.frames[index]


def read_sequence(dir_path) -> FrameSequence:
    dir_path = Path(dir_path)
    header: dict[str, str] = {}
    frames: dict[int, np.ndarray] = {}
    for line in (dir_path / "manifest.txt").read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if key == "frame":
            index, name = value.split()
            frames[int(index)] = read_frame(dir_path / name)
        else:
            header[key] = value
    return FrameSequence(frames, header.get("role", "HR"), int(header.get("native_step", 1)))


def write_sequence(frames: dict[int, np.ndarray], dir_path, role: str = "RECON",
                   native_step: int = 1) -> None:
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    sample = next(iter(frames.values()))
    lines = [f"role: {role}",
             f"width: {sample.shape[1]}",
             f"height: {sample.shape[0]}",
             f"native_step: {native_step}"]
    for index in sorted(frames):
        name = f"f{index:06d}.xfr"
        write_frame(frames[index], dir_path / name)
        lines.append(f"frame: {index} {name}")
    (dir_path / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Condition:
    target: int
    lr_prev: int
    lr_next: int
    hr_prev: int
    hr_next: int
    keyframe: bool


def read_conditions(path) -> list[Condition]:
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CONDITIONS_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for rec in reader:
            out.append(Condition(int(rec["target"]), int(rec["lr_prev"]),
                                 int(rec["lr_next"]), int(rec["hr_prev"]),
                                 int(rec["hr_next"]), bool(int(rec["keyframe"]))))
    return out


def write_attention_csv(rows: list[tuple[int, int, int, float, float]], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ATTENTION_HEADER)
        for target, prev_hr, next_hr, backward, forward in rows:
            writer.writerow([target, prev_hr, next_hr, repr(float(backward)),
                             repr(float(forward))])


def bin_mean(pixels: np.ndarray, factor: int = 4) -> np.ndarray:
    """Block-mean down-sampling (the toolkit's LR degradation)."""
    h, w = pixels.shape
    return pixels.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))
