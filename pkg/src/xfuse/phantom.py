"""Synthetic ground-truth scenes: bright particles drifting over a smooth
textured background, with an oscillating dark wedge at the bottom edge.

All randomness is consumed once at setup, so each frame is a pure
function of (config, t) and the sequence is bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .frames import Frame, Role, Sequence

_N_BG_WAVES = 4
_BG_LEVEL = 0.45
_BG_AMPLITUDE = 0.05
_PARTICLE_AMPLITUDE = 0.3
_EDGE_SOFTNESS = 1.2  # pixels over which a disk edge fades


@dataclass(frozen=True)
class PhantomConfig:
    width: int = 256
    height: int = 256
    n_frames: int = 60
    n_particles: int = 6
    particle_radius: float = 5.0
    particle_speed: float = 1.0
    keyhole_depth_amplitude: float = 0.35
    background_texture_scale: float = 48.0
    seed: int = 0

    def __post_init__(self):
        if min(self.width, self.height, self.n_frames) <= 0:
            raise ValidationError("width, height and n_frames must be positive")
        if self.n_particles < 0 or self.particle_radius <= 0:
            raise ValidationError("n_particles must be >= 0 and particle_radius > 0")
        if self.particle_speed < 0 or self.keyhole_depth_amplitude < 0:
            raise ValidationError("speeds and amplitudes must be non-negative")
        if self.background_texture_scale <= 0:
            raise ValidationError("background_texture_scale must be positive")
        if self.particle_speed * self.n_frames >= min(self.width, self.height):
            raise ValidationError(
                "particle_speed too large: motion would leave the frame "
                f"({self.particle_speed} px/frame over {self.n_frames} frames)"
            )


def _setup(cfg: PhantomConfig):
    rng = np.random.default_rng(cfg.seed)
    waves = []
    # octaves from the base texture scale down to fine detail, so the
    # scene carries structure both above and below the LR Nyquist
    for octave in range(4):
        scale = cfg.background_texture_scale / (2.0 ** octave)
        amplitude = _BG_AMPLITUDE / (1.0 + 0.4 * octave)
        for _ in range(_N_BG_WAVES):
            direction = rng.uniform(0.0, 2.0 * math.pi)
            fx, fy = math.cos(direction) / scale, math.sin(direction) / scale
            waves.append((fx, fy, rng.uniform(0.0, 2.0 * math.pi), amplitude))
    angles = rng.uniform(0.0, 2.0 * math.pi, size=cfg.n_particles)
    velocities = cfg.particle_speed * np.column_stack([np.cos(angles), np.sin(angles)])
    # start boxes shrunk on the side each particle drifts toward, so the
    # whole linear trajectory stays inside the frame
    margin = cfg.particle_radius + _EDGE_SOFTNESS + 1.0
    starts = np.zeros((cfg.n_particles, 2))
    for i in range(cfg.n_particles):
        for axis, extent in ((0, cfg.width), (1, cfg.height)):
            drift = velocities[i, axis] * (cfg.n_frames - 1)
            lo = margin + max(-drift, 0.0)
            hi = extent - margin - max(drift, 0.0)
            if hi <= lo:
                raise ValidationError(
                    "particle trajectory does not fit inside the frame; "
                    "reduce particle_speed or n_frames"
                )
            starts[i, axis] = rng.uniform(lo, hi)
    keyhole_phase = rng.uniform(0.0, 2.0 * math.pi)
    return waves, starts, velocities, keyhole_phase


def _background(cfg: PhantomConfig, waves) -> np.ndarray:
    y, x = np.mgrid[0:cfg.height, 0:cfg.width].astype(np.float64)
    bg = np.full((cfg.height, cfg.width), _BG_LEVEL)
    for fx, fy, phase, amplitude in waves:
        bg += amplitude * np.sin(2.0 * math.pi * (fx * x + fy * y) + phase)
    return bg


def _keyhole_mask(cfg: PhantomConfig) -> np.ndarray:
    # triangular wedge rising from the bottom edge, smooth sides
    y, x = np.mgrid[0:cfg.height, 0:cfg.width].astype(np.float64)
    wedge_h = 0.18 * cfg.height
    half_w = 0.06 * cfg.width
    xc = 0.5 * cfg.width
    rise = (y - (cfg.height - wedge_h)) / wedge_h
    width_here = half_w * np.clip(rise, 0.0, 1.0)
    inside = np.clip((width_here - np.abs(x - xc)) / 2.0 + 0.5, 0.0, 1.0)
    inside[rise <= 0] = 0.0
    return inside


def gen_phantom(cfg: PhantomConfig) -> Sequence:
    """Deterministic HR ground-truth sequence with values in [0, 1]."""
    waves, starts, velocities, keyhole_phase = _setup(cfg)
    bg = _background(cfg, waves)
    keyhole = _keyhole_mask(cfg)
    y, x = np.mgrid[0:cfg.height, 0:cfg.width].astype(np.float64)

    frames = []
    for t in range(cfg.n_frames):
        img = bg.copy()
        centers = starts + velocities * t
        for cx, cy in centers:
            d = np.hypot(x - cx, y - cy)
            img += _PARTICLE_AMPLITUDE * np.clip(
                (cfg.particle_radius - d) / _EDGE_SOFTNESS + 0.5, 0.0, 1.0
            )
        if cfg.keyhole_depth_amplitude > 0:
            depth = cfg.keyhole_depth_amplitude * (
                0.8 + 0.2 * math.sin(2.0 * math.pi * t / max(cfg.n_frames, 2) + keyhole_phase)
            )
            img -= depth * keyhole
        frames.append(Frame(np.clip(img, 0.0, 1.0).astype(np.float32), t))
    return Sequence(tuple(frames), Role.HR, native_step=1)


def div_prev(seq: Sequence, epsilon: float = 1e-3) -> Sequence:
    """Pixel-wise ratio of each frame to its predecessor; drops frame 0."""
    if len(seq) < 2:
        raise ValidationError("div_prev needs at least two frames")
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    frames = []
    for prev, cur in zip(seq.frames, seq.frames[1:]):
        denom = np.maximum(prev.pixels.astype(np.float64), epsilon)
        frames.append(Frame((cur.pixels.astype(np.float64) / denom).astype(np.float32),
                            cur.frame_index))
    return Sequence(tuple(frames), seq.role, seq.native_step)
