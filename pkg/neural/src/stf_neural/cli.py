"""Command-line entry points: toy training and condition-list export."""

from __future__ import annotations

import argparse
import sys

from .model import ModelConfig
from .train import TrainConfig, load_checkpoint, train_toy


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stf-neural")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="toy training on HR sequence dirs")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--recon-blocks", type=int, default=4)
    p.add_argument("--shared-blocks", type=int, default=2)
    p.add_argument("--crop-hr", type=int, default=128)
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("export", help="reconstruct a benchmark condition list")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--lr", required=True)
    p.add_argument("--hr", required=True)
    p.add_argument("--conditions", required=True)
    p.add_argument("--recon-out", required=True)
    p.add_argument("--attention-out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        tc = TrainConfig(iterations=args.iterations, learning_rate=args.learning_rate,
                         crop_hr=args.crop_hr,
                         b0_log_range=None if args.no_noise else (1.0, 7.0))
        mc = ModelConfig(channels=args.channels, recon_res_blocks=args.recon_blocks,
                         shared_res_blocks=args.shared_blocks)
        ckpt, trace = train_toy(args.data, args.out, tc, mc, seed=args.seed)
        print(f"checkpoint: {ckpt}\ntrace: {trace}")
    else:
        from .export import export_run
        model = load_checkpoint(args.checkpoint)
        n = export_run(model, args.lr, args.hr, args.conditions,
                       args.recon_out, args.attention_out)
        print(f"exported {n} frames to {args.recon_out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
