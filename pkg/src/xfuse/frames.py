"""Frame and sequence data model with bit-exact binary file I/O.

On-disk layout of a single frame (the ``XFR1`` format)::

    bytes 0..3    magic b"XFR1"
    bytes 4..7    width,  uint32 little-endian
    bytes 8..11   height, uint32 little-endian
    bytes 12..15  dtype code, uint32 little-endian (0 = float32 LE)
    bytes 16..    width*height float32 pixels, row-major

A sequence is a directory holding one ``.xfr`` file per frame plus a
``manifest.txt`` of ``key: value`` lines followed by one ``frame:`` line
per frame (master-timeline index and relative file name).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import FrameFormatError, ValidationError

MAGIC = b"XFR1"
DTYPE_FLOAT32_LE = 0
MANIFEST_NAME = "manifest.txt"

_HEADER = struct.Struct("<4sIII")
_MAX_DIM = 2**32 - 1


class Role(Enum):
    HR = "HR"
    LR = "LR"
    RECON = "RECON"


@dataclass(frozen=True, eq=False)
class Frame:
    """One grayscale frame: float32 pixels, shape (height, width).

    Pixel values are normalized intensities, nominally in [0, 1] but not
    clamped; they must always be finite. The array is made read-only so
    frames can be shared freely.
    """

    pixels: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        arr = np.ascontiguousarray(self.pixels, dtype=np.float32)
        if arr.ndim != 2:
            raise ValidationError(f"frame pixels must be 2-D, got ndim={arr.ndim}")
        h, w = arr.shape
        if w <= 0 or h <= 0:
            raise ValidationError(f"frame dimensions must be positive, got {w}x{h}")
        if not np.isfinite(arr).all():
            raise ValidationError("frame contains non-finite pixel values")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)
        object.__setattr__(self, "frame_index", int(self.frame_index))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def with_index(self, frame_index: int) -> "Frame":
        return Frame(self.pixels, frame_index)


@dataclass(frozen=True, eq=False)
class Sequence:
    """An ordered run of equally sized frames on the master timeline.

    ``native_step`` records the nominal stride between stored frames in
    master-timeline units; indices are stored explicitly so a trailing
    off-grid frame (kept by temporal down-sampling) is representable.
    """

    frames: tuple[Frame, ...]
    role: Role
    native_step: int = 1

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValidationError("sequence must contain at least one frame")
        if self.native_step < 1:
            raise ValidationError(f"native_step must be >= 1, got {self.native_step}")
        w, h = frames[0].width, frames[0].height
        for f in frames:
            if f.width != w or f.height != h:
                raise ValidationError(
                    f"all frames must share dimensions {w}x{h}, "
                    f"frame {f.frame_index} is {f.width}x{f.height}"
                )
        idx = [f.frame_index for f in frames]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValidationError(f"frame indices must be strictly increasing, got {idx}")
        object.__setattr__(self, "frames", frames)

    @property
    def frame_indices(self) -> tuple[int, ...]:
        return tuple(f.frame_index for f in self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    def __len__(self) -> int:
        return len(self.frames)

    def frame_at(self, frame_index: int) -> Frame:
        """Frame stored at the given master-timeline index."""
        for f in self.frames:
            if f.frame_index == frame_index:
                return f
        raise ValidationError(f"no frame at master index {frame_index}")


@dataclass(frozen=True, eq=False)
class SequencePair:
    """Aligned dual-stream acquisition: dense LR plus sparse HR."""

    lr: Sequence
    hr: Sequence
    lr_separation: int = 1
    hr_downsample: int = 20
    spatial_factor: int = 4

    def __post_init__(self):
        if self.spatial_factor < 1:
            raise ValidationError("spatial_factor must be >= 1")
        if self.lr_separation not in (1, 2, 3):
            raise ValidationError(f"lr_separation must be in {{1,2,3}}, got {self.lr_separation}")
        if self.hr_downsample < 1:
            raise ValidationError(f"hr_downsample must be >= 1, got {self.hr_downsample}")
        if (
            self.hr.width != self.spatial_factor * self.lr.width
            or self.hr.height != self.spatial_factor * self.lr.height
        ):
            raise ValidationError(
                f"HR dims {self.hr.width}x{self.hr.height} must be "
                f"{self.spatial_factor}x the LR dims {self.lr.width}x{self.lr.height}"
            )
        lr_idx = set(self.lr.frame_indices)
        missing = [i for i in self.hr.frame_indices if i not in lr_idx]
        if missing:
            raise ValidationError(f"HR frame indices {missing} missing from the LR timeline")


def write_frame(frame: Frame, path) -> None:
    """Write one frame as an XFR1 file. Round-trips bit-exactly."""
    if frame.width > _MAX_DIM or frame.height > _MAX_DIM:
        raise ValidationError("frame dimensions overflow uint32")
    payload = frame.pixels.astype("<f4", copy=False).tobytes()
    header = _HEADER.pack(MAGIC, frame.width, frame.height, DTYPE_FLOAT32_LE)
    Path(path).write_bytes(header + payload)


def read_frame(path, frame_index: int = 0) -> Frame:
    """Read an XFR1 file back into a Frame (exact inverse of write_frame)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FrameFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, width, height, dtype = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FrameFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if dtype != DTYPE_FLOAT32_LE:
        raise FrameFormatError(f"{path}: unsupported dtype code {dtype}")
    if width == 0 or height == 0:
        raise FrameFormatError(f"{path}: zero dimension {width}x{height}")
    expected = width * height * 4
    payload = raw[_HEADER.size:]
    if len(payload) != expected:
        raise FrameFormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected} "
            f"for {width}x{height} float32"
        )
    pixels = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    if not np.isfinite(pixels).all():
        raise FrameFormatError(f"{path}: payload contains non-finite values")
    return Frame(pixels, frame_index)


def _frame_file_name(frame_index: int) -> str:
    return f"f{frame_index:06d}.xfr"


def write_manifest(seq: Sequence, dir_path) -> None:
    """Write a sequence as a manifest plus one XFR1 file per frame."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    lines = [
        f"role: {seq.role.value}",
        f"width: {seq.width}",
        f"height: {seq.height}",
        f"native_step: {seq.native_step}",
    ]
    for frame in seq.frames:
        name = _frame_file_name(frame.frame_index)
        write_frame(frame, dir_path / name)
        lines.append(f"frame: {frame.frame_index} {name}")
    (dir_path / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(dir_path) -> Sequence:
    """Read a sequence directory written by write_manifest (exact inverse)."""
    dir_path = Path(dir_path)
    manifest = dir_path / MANIFEST_NAME
    if not manifest.is_file():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {dir_path}")
    header: dict[str, str] = {}
    entries: list[tuple[int, str]] = []
    for lineno, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if sep != ":":
            raise FrameFormatError(f"{manifest}:{lineno}: expected 'key: value'")
        if key == "frame":
            parts = value.split()
            if len(parts) != 2:
                raise FrameFormatError(f"{manifest}:{lineno}: expected 'frame: <index> <file>'")
            entries.append((int(parts[0]), parts[1]))
        else:
            header[key] = value
    for key in ("role", "width", "height", "native_step"):
        if key not in header:
            raise FrameFormatError(f"{manifest}: missing header key '{key}'")
    try:
        role = Role(header["role"])
    except ValueError:
        raise FrameFormatError(f"{manifest}: unknown role '{header['role']}'") from None
    width, height = int(header["width"]), int(header["height"])
    step = int(header["native_step"])
    if not entries:
        raise FrameFormatError(f"{manifest}: no frame entries")
    if any(b <= a for (a, _), (b, _) in zip(entries, entries[1:])):
        raise FrameFormatError(f"{manifest}: frame indices are not strictly increasing")

    frames = []
    for frame_index, name in entries:
        path = dir_path / name
        if not path.is_file():
            raise FileNotFoundError(f"{manifest}: missing frame file {path}")
        frame = read_frame(path, frame_index)
        if frame.width != width or frame.height != height:
            raise FrameFormatError(
                f"{path}: payload is {frame.width}x{frame.height}, "
                f"manifest declares {width}x{height}"
            )
        frames.append(frame)
    return Sequence(tuple(frames), role, step)


def sequence_from_arrays(arrays: Iterable[np.ndarray], role: Role,
                         indices: Iterable[int] | None = None,
                         native_step: int = 1) -> Sequence:
    """Convenience constructor from raw 2-D arrays."""
    arrays = list(arrays)
    idx = list(indices) if indices is not None else list(range(len(arrays)))
    frames = tuple(Frame(a, i) for a, i in zip(arrays, idx))
    return Sequence(frames, role, native_step)
