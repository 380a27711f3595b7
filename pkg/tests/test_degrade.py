import math

import numpy as np
import pytest

from xfuse.degrade import (NoiseConfig, add_poisson, bin_spatial, calibrate_b0,
                           downsample_temporal, normalize_sequence)
from xfuse.errors import ValidationError
from xfuse.frames import Frame, Role, sequence_from_arrays


def nearest_rank_oracle(values, q):
    """Lower nearest-rank percentile: sorted index ceil(q*N) - 1."""
    values = np.sort(np.asarray(values).ravel())
    idx = min(max(math.ceil(q * values.size) - 1, 0), values.size - 1)
    return float(values[idx])


class TestBinSpatial:
    def test_constant_block(self):
        out = bin_spatial(Frame(np.full((4, 4), 0.42, np.float32)), 4)
        assert out.pixels.shape == (1, 1)
        assert out.pixels[0, 0] == pytest.approx(0.42, abs=1e-7)

    def test_mean_of_1_to_16(self):
        block = np.arange(1, 17, dtype=np.float32).reshape(4, 4)
        out = bin_spatial(Frame(block), 4)
        assert out.pixels[0, 0] == pytest.approx(8.5)

    def test_output_dims(self):
        rng = np.random.default_rng(0)
        out = bin_spatial(Frame(rng.random((1024, 400)).astype(np.float32)), 4)
        assert (out.width, out.height) == (100, 256)

    def test_preserves_global_mean(self):
        rng = np.random.default_rng(1)
        f = Frame(rng.random((64, 96)).astype(np.float32))
        out = bin_spatial(f, 4)
        assert out.pixels.mean() == pytest.approx(f.pixels.astype(np.float64).mean(),
                                                  rel=1e-6)

    def test_non_divisible_rejected(self):
        with pytest.raises(ValidationError, match="divisible"):
            bin_spatial(Frame(np.zeros((5, 8), dtype=np.float32)), 4)


class TestNormalizeSequence:
    def test_uniform_span_percentiles(self):
        vals = np.linspace(0.0, 1000.0, 200_000, dtype=np.float64)
        rng = np.random.default_rng(2)
        rng.shuffle(vals)
        seq = sequence_from_arrays(
            [vals[:100_000].reshape(250, 400), vals[100_000:].reshape(250, 400)],
            Role.HR,
        )
        normed, stats = normalize_sequence(seq)
        pooled = np.concatenate([f.pixels.ravel() for f in seq.frames])
        assert stats.p_low == pytest.approx(nearest_rank_oracle(pooled, 0.0035), abs=1e-4)
        assert stats.p_high == pytest.approx(nearest_rank_oracle(pooled, 0.9965), abs=1e-4)
        assert stats.p_low == pytest.approx(3.5, abs=0.1)
        assert stats.p_high == pytest.approx(996.5, abs=0.1)
        lo = min(f.pixels.min() for f in normed.frames)
        hi = max(f.pixels.max() for f in normed.frames)
        assert lo == 0.0 and hi == 1.0

    def test_identity_like_on_unit_data(self):
        rng = np.random.default_rng(3)
        seq = sequence_from_arrays([rng.random((64, 64)) for _ in range(2)], Role.LR)
        normed, stats = normalize_sequence(seq)
        for a, b in zip(seq.frames, normed.frames):
            interior = (a.pixels > stats.p_low) & (a.pixels < stats.p_high)
            assert np.allclose(a.pixels[interior], b.pixels[interior], atol=0.02)

    def test_constant_sequence_rejected(self):
        seq = sequence_from_arrays([np.full((8, 8), 0.5)], Role.LR)
        with pytest.raises(ValidationError, match="degenerate"):
            normalize_sequence(seq)

    def test_monotone_within_clip(self):
        rng = np.random.default_rng(4)
        seq = sequence_from_arrays([rng.random((128, 128))], Role.LR)
        normed, _ = normalize_sequence(seq)
        src = seq.frames[0].pixels.ravel()
        dst = normed.frames[0].pixels.ravel()
        order = np.argsort(src, kind="stable")
        assert np.all(np.diff(dst[order]) >= 0)


class TestDownsampleTemporal:
    def _seq(self, n):
        return sequence_from_arrays([np.full((2, 2), i / n) for i in range(n)], Role.HR)

    def test_stride_20(self):
        out = downsample_temporal(self._seq(450), 20)
        assert out.frame_indices == tuple(range(0, 441, 20))
        assert len(out) == 23
        assert out.native_step == 20

    def test_leading_and_trailing_only(self):
        out = downsample_temporal(self._seq(450), 450, keep_trailing=True)
        assert out.frame_indices == (0, 449)

    def test_identity(self):
        seq = self._seq(7)
        out = downsample_temporal(seq, 1)
        assert out.frame_indices == seq.frame_indices

    def test_indices_subset_and_first_kept(self):
        seq = self._seq(101)
        for k in (2, 3, 7, 10):
            out = downsample_temporal(seq, k, keep_trailing=True)
            assert set(out.frame_indices) <= set(seq.frame_indices)
            assert out.frame_indices[0] == seq.frame_indices[0]


class TestAddPoisson:
    def test_high_b0_near_identity(self):
        rng = np.random.default_rng(5)
        f = Frame(rng.random((64, 64)).astype(np.float32))
        out = add_poisson(f, NoiseConfig(b0=1e7, seed=0))
        assert np.abs(out.pixels - f.pixels).max() < 20 * math.sqrt(1 / 1e7)

    def test_zero_stays_zero(self):
        f = Frame(np.zeros((16, 16), dtype=np.float32))
        out = add_poisson(f, NoiseConfig(b0=100, seed=1))
        assert np.all(out.pixels == 0.0)

    def test_flat_half_mse(self):
        f = Frame(np.full((256, 256), 0.5, np.float32))
        out = add_poisson(f, NoiseConfig(b0=500, seed=2))
        mse = float(np.mean((out.pixels - 0.5) ** 2))
        assert mse == pytest.approx(1e-3, rel=0.05)

    def test_deterministic_per_key(self):
        f = Frame(np.full((32, 32), 0.3, np.float32), frame_index=7)
        a = add_poisson(f, NoiseConfig(b0=1000, seed=9))
        b = add_poisson(f, NoiseConfig(b0=1000, seed=9))
        c = add_poisson(f, NoiseConfig(b0=1000, seed=10))
        assert np.array_equal(a.pixels, b.pixels)
        assert not np.array_equal(a.pixels, c.pixels)

    def test_single_pixel_moments(self):
        # N repeated draws of one pixel via distinct frame indices
        value, b0, n = 0.37, 200.0, 100_000
        samples = add_poisson(
            Frame(np.full((1, n), value, np.float32)), NoiseConfig(b0=b0, seed=3)
        ).pixels.ravel()
        mean, var = samples.mean(), samples.var()
        sigma = math.sqrt(value / b0 / n)
        assert abs(mean - value) < 4 * sigma
        assert var == pytest.approx(value / b0, rel=0.1)


class TestCalibrateB0:
    def _flat_seq(self, value=0.5, shape=(256, 256)):
        return sequence_from_arrays([np.full(shape, value, np.float32)], Role.LR)

    def test_closed_form_30db(self):
        assert calibrate_b0(self._flat_seq(), 30.0) == pytest.approx(500.0, rel=0.01)

    def test_closed_form_60db(self):
        assert calibrate_b0(self._flat_seq(), 60.0) == pytest.approx(5e5, rel=0.01)

    def test_unreachable_reports_bound(self):
        with pytest.raises(ValidationError, match="achievable"):
            calibrate_b0(self._flat_seq(), 120.0)

    def test_target_range_enforced(self):
        # reachable b0 but outside the supported PSNR band
        with pytest.raises(ValidationError, match="target_psnr"):
            calibrate_b0(self._flat_seq(value=0.2), 69.5 + 1.0)

    def test_measured_psnr_within_half_db(self):
        from xfuse.metrics import psnr
        seq = self._flat_seq()
        for target in (20.0, 40.0):
            b0 = calibrate_b0(seq, target)
            f = seq.frames[0]
            noisy = add_poisson(f, NoiseConfig(b0=b0, seed=11))
            assert psnr(noisy, f) == pytest.approx(target, abs=0.5)
