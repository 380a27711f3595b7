"""Command-line front end.

Every subcommand accepts ``--config FILE`` (key: value lines, same keys
as the long flags with dashes swapped for underscores); explicit flags
override config values. Exit codes: 0 success, 1 validation error,
2 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import bayes
from .attention import (histogram2d, monotonicity_stat, normalize_scores,
                        read_attention_csv, write_histogram_csv)
from .bench import (GridConfig, build_conditions, run_grid, time_method,
                    write_timing_csv)
from .bicubic import ResampleConfig, upsample_bicubic
from .degrade import (NoiseConfig, add_poisson, bin_spatial, calibrate_b0,
                      downsample_temporal, normalize_sequence)
from .errors import FrameFormatError, ValidationError
from .frames import Role, Sequence, SequencePair, read_manifest, write_manifest
from .metrics import (DEFAULT_METRICS, MetricsRow, aad, psnr, ssim, summarize,
                      write_metrics_csv, write_summary_csv)
from .phantom import PhantomConfig, gen_phantom


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage errors are validation errors
        raise ValidationError(message)


def _read_config(path) -> dict[str, str]:
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if sep != ":":
            raise ValidationError(f"{path}:{lineno}: expected 'key: value'")
        cfg[key.strip()] = value.strip()
    return cfg


def _opt(args, cfg: dict, name: str, default, cast=str):
    flag = getattr(args, name)
    if flag is not None:
        return flag
    if name in cfg:
        return cast(cfg[name])
    if default is None:
        raise ValidationError(f"missing required option --{name.replace('_', '-')}")
    return default


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _noise_list(text: str) -> tuple:
    return tuple(v if v == "none" else int(v) for v in text.split(","))


def _cmd_phantom(args, cfg):
    pc = PhantomConfig(
        width=_opt(args, cfg, "width", 256, int),
        height=_opt(args, cfg, "height", 256, int),
        n_frames=_opt(args, cfg, "frames", 60, int),
        n_particles=_opt(args, cfg, "particles", 6, int),
        particle_radius=_opt(args, cfg, "radius", 5.0, float),
        particle_speed=_opt(args, cfg, "speed", 1.0, float),
        keyhole_depth_amplitude=_opt(args, cfg, "keyhole", 0.35, float),
        background_texture_scale=_opt(args, cfg, "texture_scale", 48.0, float),
        seed=_opt(args, cfg, "seed", 0, int),
    )
    out = _opt(args, cfg, "out", None)
    write_manifest(gen_phantom(pc), out)
    print(f"wrote {pc.n_frames} frames ({pc.width}x{pc.height}) to {out}")


def _cmd_degrade(args, cfg):
    seq = read_manifest(_opt(args, cfg, "in_dir", None))
    bin_factor = _opt(args, cfg, "bin", 0, int)
    if bin_factor:
        seq = Sequence(tuple(bin_spatial(f, bin_factor) for f in seq.frames),
                       Role.LR, seq.native_step)
    if _opt(args, cfg, "normalize", False, lambda v: v == "true"):
        seq, stats = normalize_sequence(seq)
        print(f"normalized with p_low={stats.p_low:.6g} p_high={stats.p_high:.6g}")
    temporal = _opt(args, cfg, "temporal", 0, int)
    if temporal:
        seq = downsample_temporal(seq, temporal,
                                  keep_trailing=_opt(args, cfg, "keep_trailing", False,
                                                     lambda v: v == "true"))
    noise_psnr = _opt(args, cfg, "noise_psnr", 0.0, float)
    b0 = _opt(args, cfg, "b0", 0.0, float)
    if noise_psnr and not b0:
        b0 = calibrate_b0(seq, noise_psnr)
        print(f"calibrated b0={b0:.6g} for {noise_psnr:g} dB")
    if b0:
        ncfg = NoiseConfig(b0=b0, seed=_opt(args, cfg, "seed", 0, int))
        seq = Sequence(tuple(add_poisson(f, ncfg) for f in seq.frames),
                       seq.role, seq.native_step)
    out = _opt(args, cfg, "out", None)
    write_manifest(seq, out)
    print(f"wrote {len(seq)} frames ({seq.width}x{seq.height}) to {out}")


def _cmd_upsample(args, cfg):
    seq = read_manifest(_opt(args, cfg, "in_dir", None))
    rc = ResampleConfig(factor=_opt(args, cfg, "factor", 4, int),
                        kernel_a=_opt(args, cfg, "kernel_a", -0.75, float))
    out_seq = Sequence(tuple(upsample_bicubic(f, rc) for f in seq.frames),
                       Role.RECON, seq.native_step)
    out = _opt(args, cfg, "out", None)
    write_manifest(out_seq, out)
    print(f"wrote {len(out_seq)} frames ({out_seq.width}x{out_seq.height}) to {out}")


def _cmd_fuse_bayes(args, cfg):
    lr = read_manifest(_opt(args, cfg, "lr", None))
    hr = read_manifest(_opt(args, cfg, "hr", None))
    sep = _opt(args, cfg, "lr_sep", 1, int)
    seed = _opt(args, cfg, "seed", 0, int)
    hr_ds = hr.native_step // max(lr.native_step, 1)
    pair = SequencePair(lr, hr, lr_separation=sep,
                        hr_downsample=hr_ds if hr_ds >= 1 else 1)
    cset = build_conditions(pair)
    dump_path = _opt(args, cfg, "dump_clusters", "", str)
    dump_rows = []
    frames = []
    from .bench import _run_bayes  # shared with the grid runner
    for cond in cset.conditions:
        frames.append(_run_bayes(pair, cond, seed))
        if dump_path:
            series = np.column_stack([
                pair.lr.frame_at(cond.hr_prev).pixels.ravel(),
                pair.lr.frame_at(cond.target).pixels.ravel(),
                pair.lr.frame_at(cond.hr_next).pixels.ravel(),
            ]).astype(np.float64)
            k = bayes.cluster_count(pair.lr.width, pair.lr.height)
            model = bayes.fit_clusters(series, k, seed=seed)
            for j in range(model.k):
                m, c = model.means[j], model.covariances[j]
                dump_rows.append([cond.target, j, *m,
                                  c[0, 0], c[0, 1], c[0, 2], c[1, 1], c[1, 2], c[2, 2]])
    out = _opt(args, cfg, "out", None)
    write_manifest(Sequence(tuple(frames), Role.RECON, lr.native_step), out)
    if dump_path:
        with Path(dump_path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["target", "cluster", "mu_prev", "mu_ref", "mu_next",
                             "c00", "c01", "c02", "c11", "c12", "c22"])
            writer.writerows(dump_rows)
    print(f"fused {len(frames)} frames ({cset.skipped} boundary targets skipped) to {out}")


def _cmd_metrics(args, cfg):
    recon = read_manifest(_opt(args, cfg, "recon", None))
    truth = read_manifest(_opt(args, cfg, "truth", None))
    truth_by_index = {f.frame_index: f for f in truth.frames}
    case = _opt(args, cfg, "case", "case", str)
    method = _opt(args, cfg, "method", "external", str)
    lr_sep = _opt(args, cfg, "lr_sep", 1, int)
    hr_ds = _opt(args, cfg, "hr_ds", 20, int)
    noise = _opt(args, cfg, "noise_psnr", "none", str)
    rows = []
    for f in recon.frames:
        ref = truth_by_index.get(f.frame_index)
        if ref is None:
            print(f"no ground truth for frame {f.frame_index}; skipped", file=sys.stderr)
            continue
        rows.append(MetricsRow(case, method, lr_sep, hr_ds, noise, f.frame_index,
                               psnr(f, ref, DEFAULT_METRICS), aad(f, ref),
                               ssim(f, ref, DEFAULT_METRICS)))
    if not rows:
        raise ValidationError("no frames could be scored")
    out = _opt(args, cfg, "out", None)
    write_metrics_csv(rows, out)
    summary_path = _opt(args, cfg, "summary", "", str)
    if summary_path:
        keys = ("case_id", "method", "lr_sep", "hr_ds", "noise_psnr")
        write_summary_csv(summarize(rows, keys), keys, summary_path)
    print(f"scored {len(rows)} frames to {out}")


def _cmd_attn_stats(args, cfg):
    records = read_attention_csv(_opt(args, cfg, "in_csv", None))
    normalized = normalize_scores(records)
    max_offset = _opt(args, cfg, "max_offset", 0, int) or None
    width = _opt(args, cfg, "score_bin_width", 0.05, float)
    score_max = _opt(args, cfg, "score_max", 1.2, float)
    backward, forward = histogram2d(normalized, max_offset, width, score_max)
    prefix = _opt(args, cfg, "out_prefix", None)
    write_histogram_csv(backward, f"{prefix}_backward.csv")
    write_histogram_csv(forward, f"{prefix}_forward.csv")
    stats = monotonicity_stat(normalized)
    print(f"monotonicity backward={stats.backward:.4f} forward={stats.forward:.4f}")
    print(f"histograms written to {prefix}_backward.csv and {prefix}_forward.csv")


def _cmd_bench(args, cfg):
    grid = GridConfig(
        case_id=_opt(args, cfg, "case", None),
        lr_separations=_opt(args, cfg, "lr_sep", (1,), _int_list),
        hr_downsamples=_opt(args, cfg, "hr_ds", (20,), _int_list),
        noise_psnr_levels=_opt(args, cfg, "noise_psnr", ("none",), _noise_list),
        methods=_opt(args, cfg, "methods", ("bicubic", "bayes"),
                     lambda v: tuple(v.split(","))),
        seed=_opt(args, cfg, "seed", 0, int),
    )
    out = _opt(args, cfg, "out", None)
    rows = run_grid(grid, _opt(args, cfg, "truth", None), out,
                    export_inputs=_opt(args, cfg, "export_inputs", False,
                                       lambda v: v == "true"))
    print(f"wrote {len(rows)} metric rows to {out}/metrics.csv")


def _cmd_time(args, cfg):
    report = time_method(
        _opt(args, cfg, "method", None),
        n_runs=_opt(args, cfg, "n_runs", 100, int),
        lr_width=_opt(args, cfg, "lr_width", 100, int),
        lr_height=_opt(args, cfg, "lr_height", 256, int),
        seed=_opt(args, cfg, "seed", 0, int),
    )
    out = _opt(args, cfg, "out", "", str)
    if out:
        write_timing_csv([report], out)
    print(f"{report.method}: median {report.median_s:.6g}s over {report.n_runs} runs "
          f"at {report.width}x{report.height}")


def _add_common(sp):
    sp.add_argument("--config", default=None, help="key: value config file")
    sp.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xfuse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic HR ground-truth sequence")
    _add_common(p)
    p.add_argument("--out", default=None)
    for name in ("width", "height", "frames", "particles"):
        p.add_argument(f"--{name}", type=int, default=None)
    for name in ("radius", "speed", "keyhole", "texture-scale"):
        p.add_argument(f"--{name}", dest=name.replace("-", "_"), type=float, default=None)
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("degrade", help="bin, normalize, down-sample, and add noise")
    _add_common(p)
    p.add_argument("--in", dest="in_dir", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--bin", type=int, default=None)
    p.add_argument("--normalize", action="store_const", const=True, default=None)
    p.add_argument("--temporal", type=int, default=None)
    p.add_argument("--keep-trailing", dest="keep_trailing",
                   action="store_const", const=True, default=None)
    p.add_argument("--noise-psnr", dest="noise_psnr", type=float, default=None)
    p.add_argument("--b0", type=float, default=None)
    p.set_defaults(func=_cmd_degrade)

    p = sub.add_parser("upsample", help="bicubic up-sampling of every frame")
    _add_common(p)
    p.add_argument("--in", dest="in_dir", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--factor", type=int, default=None)
    p.add_argument("--kernel-a", dest="kernel_a", type=float, default=None)
    p.set_defaults(func=_cmd_upsample)

    p = sub.add_parser("fuse-bayes", help="Bayesian fusion over a sequence pair")
    _add_common(p)
    p.add_argument("--lr", default=None)
    p.add_argument("--hr", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--lr-sep", dest="lr_sep", type=int, default=None)
    p.add_argument("--dump-clusters", dest="dump_clusters", default=None)
    p.set_defaults(func=_cmd_fuse_bayes)

    p = sub.add_parser("metrics", help="score a reconstruction against ground truth")
    _add_common(p)
    p.add_argument("--recon", default=None)
    p.add_argument("--truth", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--summary", default=None)
    p.add_argument("--case", default=None)
    p.add_argument("--method", default=None)
    p.add_argument("--lr-sep", dest="lr_sep", type=int, default=None)
    p.add_argument("--hr-ds", dest="hr_ds", type=int, default=None)
    p.add_argument("--noise-psnr", dest="noise_psnr", default=None)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("attn-stats", help="normalize and histogram attention scores")
    _add_common(p)
    p.add_argument("--in", dest="in_csv", default=None)
    p.add_argument("--out-prefix", dest="out_prefix", default=None)
    p.add_argument("--max-offset", dest="max_offset", type=int, default=None)
    p.add_argument("--score-bin-width", dest="score_bin_width", type=float, default=None)
    p.add_argument("--score-max", dest="score_max", type=float, default=None)
    p.set_defaults(func=_cmd_attn_stats)

    p = sub.add_parser("bench", help="run the full experiment grid")
    _add_common(p)
    p.add_argument("--truth", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--case", default=None)
    p.add_argument("--lr-sep", dest="lr_sep", type=_int_list, default=None)
    p.add_argument("--hr-ds", dest="hr_ds", type=_int_list, default=None)
    p.add_argument("--noise-psnr", dest="noise_psnr", type=_noise_list, default=None)
    p.add_argument("--methods", type=lambda v: tuple(v.split(",")), default=None)
    p.add_argument("--export-inputs", dest="export_inputs",
                   action="store_const", const=True, default=None)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("time", help="median single-frame wall time of a method")
    _add_common(p)
    p.add_argument("--method", default=None)
    p.add_argument("--n-runs", dest="n_runs", type=int, default=None)
    p.add_argument("--lr-width", dest="lr_width", type=int, default=None)
    p.add_argument("--lr-height", dest="lr_height", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_time)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _read_config(args.config) if args.config else {}
        args.func(args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FrameFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
