"""pyrecon command line: synthesize training data, train, serve batches."""

from __future__ import annotations

import argparse
import sys

from .data import build_training_set
from .model import TrainConfig
from .serve import serve_batch
from .train import GradientCheckFailed, TrainingDiverged, train_toy


def _cmd_synth(args) -> int:
    build_training_set(
        args.out, args.count, seed=args.seed, h=args.height, w=args.width,
        identity_pairs=args.identity_pairs,
    )
    print(f"wrote {args.count} training triples -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = TrainConfig(
        steps=args.steps, lr=args.lr, batch_size=args.batch_size, seed=args.seed
    )
    try:
        result = train_toy(args.data, args.out, config)
    except (TrainingDiverged, GradientCheckFailed) as exc:
        print(f"pyrecon: training aborted: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"pyrecon: {exc}", file=sys.stderr)
        return 2
    print(
        f"trained {result.steps} steps: loss {result.initial_loss:.5f} -> "
        f"{result.final_loss:.5f}; holdout {result.holdout_loss:.5f} "
        f"(identity baseline {result.identity_baseline:.5f}) -> {args.out}"
    )
    return 0


def _cmd_serve(args) -> int:
    return serve_batch(args.input_dir, args.output_dir, args.manifest,
                       args.checkpoint)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pyrecon",
        description="Toy convolutional reconstruction backend for quantized "
        "grayscale images",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write synthetic (quantized, original) pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--identity-pairs", action="store_true")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="fit the model on a pair directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--steps", type=int, default=25_000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("serve", help="run one directory batch")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input-dir", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
