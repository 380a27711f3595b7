import pytest
import torch

from stf_neural.model import FusionNet, ModelConfig
from stf_neural.train import load_checkpoint, save_checkpoint

TOY = ModelConfig(channels=16, recon_res_blocks=4, shared_res_blocks=2)


def toy_inputs(batch=1, h=16, w=16, seed=0):
    g = torch.Generator().manual_seed(seed)
    return (torch.rand(batch, 3, h, w, generator=g),
            torch.rand(batch, 2, 4 * h, 4 * w, generator=g))


class TestShapes:
    def test_output_is_4x_lr(self):
        torch.manual_seed(0)
        model = FusionNet(TOY).eval()
        for h, w in ((16, 16), (16, 24), (8, 32)):
            lr, hr = toy_inputs(h=h, w=w)
            est, back, fwd = model(lr, hr)
            assert est.shape == (1, 1, 4 * h, 4 * w)

    def test_hr_branch_matches_lr_branch_dims(self):
        torch.manual_seed(1)
        model = FusionNet(TOY).eval()
        lr, hr = toy_inputs(h=16, w=16)
        feats = model.extract(lr, hr)
        assert feats.shape == (1, 5, TOY.channels, 16, 16)

    def test_two_attention_scalars_in_open_unit_interval(self):
        torch.manual_seed(2)
        model = FusionNet(TOY).eval()
        lr, hr = toy_inputs(batch=2)
        _, back, fwd = model(lr, hr)
        for scores in (back, fwd):
            assert scores.shape == (2,)
            assert torch.all(scores > 0) and torch.all(scores < 1)

    def test_untrained_output_finite(self):
        torch.manual_seed(3)
        model = FusionNet(TOY).eval()
        lr, hr = toy_inputs()
        est, *_ = model(lr, hr)
        assert torch.isfinite(est).all()

    def test_pad_and_crop_path(self):
        torch.manual_seed(4)
        model = FusionNet(TOY).eval()
        lr = torch.rand(1, 3, 15, 18)
        hr = torch.rand(1, 2, 60, 72)
        est, *_ = model(lr, hr)
        assert est.shape == (1, 1, 60, 72)

    def test_dim_mismatch_rejected(self):
        model = FusionNet(TOY).eval()
        with pytest.raises(ValueError, match="4x"):
            model(torch.rand(1, 3, 16, 16), torch.rand(1, 2, 32, 32))

    def test_default_config_geometry(self):
        # full-width configuration (128 channels, 40 blocks) on a tiny crop
        torch.manual_seed(5)
        model = FusionNet(ModelConfig()).eval()
        lr, hr = toy_inputs(h=8, w=8)
        with torch.no_grad():
            est, back, fwd = model(lr, hr)
        assert est.shape == (1, 1, 32, 32)
        assert 0 < float(back) < 1 and 0 < float(fwd) < 1


class TestDeterminism:
    def test_same_weights_same_output(self):
        torch.manual_seed(6)
        model = FusionNet(TOY).eval()
        lr, hr = toy_inputs(seed=9)
        with torch.no_grad():
            a, *_ = model(lr, hr)
            b, *_ = model(lr, hr)
        assert torch.equal(a, b)

    def test_checkpoint_round_trip_bit_identical(self, tmp_path):
        torch.manual_seed(7)
        model = FusionNet(TOY).eval()
        lr, hr = toy_inputs(seed=10)
        with torch.no_grad():
            before, *_ = model(lr, hr)
        save_checkpoint(model, tmp_path / "ckpt.pt")
        restored = load_checkpoint(tmp_path / "ckpt.pt")
        with torch.no_grad():
            after, *_ = restored(lr, hr)
        assert torch.equal(before, after)


class TestConfig:
    def test_channels_must_fit_groups(self):
        with pytest.raises(ValueError, match="deform groups"):
            ModelConfig(channels=12, deform_groups=8)
