import subprocess
import sys

import numpy as np
import pytest
import torch

from stf_neural.export import export_run
from stf_neural.io import bin_mean, read_sequence, write_sequence
from stf_neural.model import FusionNet, ModelConfig

TOY = ModelConfig(channels=16, recon_res_blocks=4, shared_res_blocks=2)


def make_streams(tmp_path, n=12, size=64, keyframes=(0, 5, 11)):
    rng = np.random.default_rng(0)
    hr = {t: rng.random((size, size)).astype(np.float32) for t in range(n)}
    lr = {t: bin_mean(f).astype(np.float32) for t, f in hr.items()}
    write_sequence({t: hr[t] for t in keyframes}, tmp_path / "hr", role="HR",
                   native_step=5)
    write_sequence(lr, tmp_path / "lr", role="LR")
    return tmp_path / "lr", tmp_path / "hr"


def write_window_conditions(path, targets, keyframes):
    lines = ["target,lr_prev,lr_next,hr_prev,hr_next,keyframe"]
    for t in targets:
        prev = max(k for k in keyframes if k <= t)
        nxt = min(k for k in keyframes if k >= t)
        lines.append(f"{t},{t-1},{t+1},{prev},{nxt},{int(prev == t == nxt)}")
    path.write_text("\n".join(lines) + "\n")


class TestExportRun:
    def test_exports_frames_and_attention(self, tmp_path):
        lr_dir, hr_dir = make_streams(tmp_path)
        cond_csv = tmp_path / "conditions.csv"
        write_window_conditions(cond_csv, range(1, 11), (0, 5, 11))
        torch.manual_seed(0)
        model = FusionNet(TOY).eval()
        n = export_run(model, lr_dir, hr_dir, cond_csv,
                       tmp_path / "recon", tmp_path / "attn.csv")
        assert n == 10
        recon = read_sequence(tmp_path / "recon")
        assert recon.role == "RECON"
        assert recon.indices == list(range(1, 11))
        assert recon[1].shape == (64, 64)
        lines = (tmp_path / "attn.csv").read_text().splitlines()
        assert lines[0] == "target,prev_hr,next_hr,backward_raw,forward_raw"
        assert len(lines) == 11
        # keyframe condition keeps its offset-0 anchor row
        anchor = [l for l in lines[1:] if l.startswith("5,5,5,")]
        assert anchor

    def test_missing_frames_rejected(self, tmp_path):
        lr_dir, hr_dir = make_streams(tmp_path)
        cond_csv = tmp_path / "conditions.csv"
        cond_csv.write_text(
            "target,lr_prev,lr_next,hr_prev,hr_next,keyframe\n99,98,100,0,5,0\n")
        torch.manual_seed(0)
        model = FusionNet(TOY).eval()
        with pytest.raises(ValueError, match="unavailable"):
            export_run(model, lr_dir, hr_dir, cond_csv,
                       tmp_path / "recon", tmp_path / "attn.csv")


class TestCli:
    def test_train_then_export(self, video_dir, tmp_path):
        run = subprocess.run(
            [sys.executable, "-m", "stf_neural.cli", "train",
             "--data", str(video_dir), "--out", str(tmp_path / "run"),
             "--iterations", "3", "--channels", "16", "--crop-hr", "64",
             "--no-noise", "--seed", "1"],
            capture_output=True, text=True)
        assert run.returncode == 0, run.stderr
        ckpt = tmp_path / "run" / "checkpoint.pt"
        assert ckpt.is_file()

        lr_dir, hr_dir = make_streams(tmp_path)
        cond_csv = tmp_path / "conditions.csv"
        write_window_conditions(cond_csv, range(1, 5), (0, 5, 11))
        run = subprocess.run(
            [sys.executable, "-m", "stf_neural.cli", "export",
             "--checkpoint", str(ckpt), "--lr", str(lr_dir), "--hr", str(hr_dir),
             "--conditions", str(cond_csv), "--recon-out", str(tmp_path / "recon"),
             "--attention-out", str(tmp_path / "attn.csv")],
            capture_output=True, text=True)
        assert run.returncode == 0, run.stderr
        assert (tmp_path / "recon" / "manifest.txt").is_file()
