import numpy as np
import pytest
import torch

from stf_neural.io import bin_mean
from stf_neural.model import FusionNet, ModelConfig
from stf_neural.train import (TrainConfig, TripletSampler, charbonnier, cosine_lr,
                              load_dataset, train_toy)

TOY_MODEL = ModelConfig(channels=16, recon_res_blocks=4, shared_res_blocks=2)


class TestLossAndSchedule:
    def test_charbonnier_identical_pair_is_eps(self):
        x = torch.rand(4, 4)
        assert float(charbonnier(x, x, 1e-3)) == pytest.approx(1e-3, rel=1e-6)

    def test_charbonnier_reduces_to_l1_for_large_errors(self):
        a = torch.zeros(8)
        b = torch.full((8,), 0.5)
        assert float(charbonnier(a, b, 1e-3)) == pytest.approx(0.5, rel=1e-4)

    def test_cosine_endpoints(self):
        assert cosine_lr(1e-4, 0, 300) == pytest.approx(1e-4)
        assert cosine_lr(1e-4, 300, 300) == pytest.approx(0.0, abs=1e-12)
        assert cosine_lr(1e-4, 150, 300) == pytest.approx(5e-5)


class TestSampler:
    def _sampler(self, video_dir, **overrides):
        kwargs = dict(crop_hr=64, b0_log_range=None, augment_p=0.0,
                      hr_offset_range=(1, 3))
        kwargs.update(overrides)
        return TripletSampler(load_dataset(video_dir), TrainConfig(**kwargs), seed=0)

    def test_shapes_and_binning(self, video_dir):
        sampler = self._sampler(video_dir)
        lr_t, hr_p, target = sampler.draw()
        assert lr_t.shape == (3, 16, 16)
        assert hr_p.shape == (2, 64, 64)
        assert target.shape == (64, 64)
        # the noiseless reference LR frame is the binned target
        assert np.allclose(lr_t[1].numpy(), bin_mean(target.numpy()), atol=1e-6)

    def test_noise_preserves_expectation(self, video_dir):
        cfg = TrainConfig(crop_hr=64, b0_log_range=(6.0, 6.0), augment_p=0.0,
                          hr_offset_range=(1, 3))
        sampler = TripletSampler(load_dataset(video_dir), cfg, seed=1)
        lr_t, _, target = sampler.draw()
        assert np.abs(lr_t[1].numpy() - bin_mean(target.numpy())).max() < 0.01

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            TripletSampler([], TrainConfig(), seed=0)

    def test_augmentation_keeps_geometry(self, video_dir):
        sampler = self._sampler(video_dir, augment_p=1.0)
        lr_t, hr_p, target = sampler.draw()
        assert lr_t.shape == (3, 16, 16) and hr_p.shape == (2, 64, 64)


class TestTrainToy:
    def test_overfit_oracle(self, video_dir, tmp_path):
        cfg = TrainConfig(learning_rate=2e-3, iterations=200, crop_hr=64,
                          b0_log_range=None, fixed_sample=True, augment_p=0.0,
                          lr_separations=(1,), hr_offset_range=(1, 3))
        model_cfg = ModelConfig(channels=16, recon_res_blocks=4, shared_res_blocks=2,
                                init="standard")
        ckpt, trace = train_toy(video_dir, tmp_path, cfg, model_cfg, seed=1)
        rows = trace.read_text().splitlines()[1:]
        first = float(rows[0].split(",")[2])
        last = float(rows[-1].split(",")[2])
        assert len(rows) == 200
        assert last <= 0.10 * first
        assert ckpt.is_file()

    def test_gradient_matches_finite_differences(self):
        torch.manual_seed(3)
        model = FusionNet(ModelConfig(channels=8, recon_res_blocks=2,
                                      shared_res_blocks=1)).double()
        lr = torch.rand(1, 3, 8, 8, dtype=torch.float64)
        hr = torch.rand(1, 2, 32, 32, dtype=torch.float64)
        target = torch.rand(1, 1, 32, 32, dtype=torch.float64)

        def loss_fn():
            est, *_ = model(lr, hr)
            return charbonnier(est, target)

        # two warmup steps move the zero-initialized heads off zero so
        # gradients reach every layer
        warmup = torch.optim.Adam(model.parameters(), lr=1e-3)
        for _ in range(2):
            warmup.zero_grad()
            loss_fn().backward()
            warmup.step()

        model.zero_grad()
        loss_fn().backward()
        rng = np.random.default_rng(0)
        params = [p for p in model.parameters()
                  if p.grad is not None and float(p.grad.abs().max()) > 1e-6]
        checked = 0
        for p_idx in rng.permutation(len(params)):
            param = params[p_idx]
            flat = param.detach().reshape(-1)
            grads = param.grad.reshape(-1)
            # finite differences are only trustworthy away from zero
            live = torch.nonzero(grads.abs() > 1e-6).reshape(-1)
            idx = int(live[int(rng.integers(len(live)))])
            g_auto = float(grads[idx])
            h = 1e-6 * max(1.0, abs(float(flat[idx])))
            with torch.no_grad():
                orig = float(flat[idx])
                flat[idx] = orig + h
                lp = float(loss_fn())
                flat[idx] = orig - h
                lm = float(loss_fn())
                flat[idx] = orig
            g_fd = (lp - lm) / (2.0 * h)
            assert abs(g_auto - g_fd) / max(abs(g_auto), abs(g_fd)) <= 1e-3
            checked += 1
            if checked == 6:
                break
        assert checked == 6

    def test_loss_trace_schema(self, video_dir, tmp_path):
        cfg = TrainConfig(learning_rate=1e-3, iterations=3, crop_hr=64,
                          b0_log_range=None, hr_offset_range=(1, 3))
        _, trace = train_toy(video_dir, tmp_path, cfg, TOY_MODEL, seed=2)
        lines = trace.read_text().splitlines()
        assert lines[0] == "iteration,learning_rate,charbonnier_loss"
        assert len(lines) == 4
