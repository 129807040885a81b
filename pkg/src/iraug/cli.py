"""Command-line front end.

Verbs: ingest, split, augment, report, schedule-export. Exit code 0 on
success; failures print `ERROR <category>: <message>` on stderr and exit
with the category's code (config=2, io=3, format=4, contract=5, backend=6).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .diffusion import build_schedule
from .errors import EXIT_CODES, ConfigError, ToolkitError
from .evaluation import pd_fa_sweep, render_table, sweep_csv
from .pipeline import (
    MetricOptions,
    ingest,
    load_config,
    report_directories,
    run_augment,
    split_dataset,
)
from .raster import load_gray_image, load_target_mask


def _add_config_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--seed", type=int, default=None, help="override global_seed")
    p.add_argument("--ratio", type=float, default=None, help="override split ratio")
    p.add_argument("--passes", type=int, default=None, help="override pass count")
    p.add_argument("--out", default=None, help="override output_root")
    p.add_argument(
        "--backend", default=None,
        help="restrict the chain to one configured backend by name",
    )


def _config_from_args(args) -> "PipelineConfig":
    overrides = {
        "global_seed": args.seed,
        "ratio": args.ratio,
        "passes": getattr(args, "passes", None),
        "output_root": args.out,
    }
    config = load_config(args.config, overrides)
    if getattr(args, "backend", None):
        chain = [b for b in config.backends if b.name == args.backend]
        if not chain:
            raise ConfigError(f"backend {args.backend!r} not defined in config")
        config = replace(config, backends=tuple(chain))
    return config


def _cmd_ingest(args) -> int:
    index = ingest(args.dataset_root)
    index.save_tsv(args.out)
    print(f"indexed {len(index)} samples -> {args.out}")
    return 0


def _cmd_split(args) -> int:
    index = ingest(args.dataset_root)
    subset = split_dataset(index, args.ratio, args.seed)
    subset.save_tsv(args.out)
    print(f"selected {len(subset)}/{len(index)} samples -> {args.out}")
    return 0


def _cmd_augment(args) -> int:
    config = _config_from_args(args)
    records = run_augment(config, resume=args.resume)
    print(f"wrote {len(records)} records -> {Path(config.output_root) / 'manifest.jsonl'}")
    return 0


def _cmd_report(args) -> int:
    options = MetricOptions(
        match_radius=args.match_radius, connectivity=args.connectivity
    )
    result = report_directories(args.pred_dir, args.gt_dir, options)
    named = list(result.per_image) + [("__aggregate__", result.aggregate)]
    table = render_table(named)
    print(table, end="")
    if result.unmatched_pred or result.unmatched_gt:
        n = len(result.unmatched_pred) + len(result.unmatched_gt)
        print(
            f"warning: {n} unmatched sample id(s) excluded "
            f"(pred-only: {list(result.unmatched_pred)}, "
            f"gt-only: {list(result.unmatched_gt)})",
            file=sys.stderr,
        )
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        lines = [
            json.dumps({"sample_id": sid, **rep.to_dict()},
                       sort_keys=True, separators=(",", ":"))
            for sid, rep in named
        ]
        (outdir / "report.jsonl").write_text("\n".join(lines) + "\n", "utf-8")
        (outdir / "report.txt").write_text(table, "utf-8")
        if args.sweep:
            pairs = []
            preds = {p.stem: p for p in sorted(Path(args.pred_dir).iterdir())
                     if p.suffix.lower() in (".png", ".pgm")}
            gts = {p.stem: p for p in sorted(Path(args.gt_dir).iterdir())
                   if p.suffix.lower() in (".png", ".pgm")}
            for sid in sorted(set(preds) & set(gts)):
                pairs.append(
                    (load_gray_image(preds[sid]), load_target_mask(gts[sid]))
                )
            thresholds = [i / args.sweep for i in range(args.sweep + 1)]
            rows = pd_fa_sweep(pairs, thresholds, options.match_radius,
                               options.connectivity)
            (outdir / "sweep.csv").write_text(sweep_csv(rows), "utf-8")
    return 0


def _cmd_schedule_export(args) -> int:
    sched = build_schedule(args.kind, args.steps, args.beta_start, args.beta_end)
    table = sched.export_table()
    if args.out:
        Path(args.out).write_text(table, "utf-8")
        print(f"wrote schedule table -> {args.out}")
    else:
        print(table, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iraug",
        description="Quantization-based augmentation and detection metrics "
        "for infrared small-target imagery",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="index a dataset (images/ + masks/)")
    p.add_argument("--dataset-root", required=True)
    p.add_argument("--out", required=True, help="index TSV output path")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("split", help="deterministic scarcity subset")
    p.add_argument("--dataset-root", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="subset TSV output path")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("augment", help="run the augmentation pipeline")
    _add_config_overrides(p)
    p.add_argument("--resume", action="store_true",
                   help="keep samples already present in the manifest")
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("report", help="score prediction masks against GT")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--out", default=None, help="directory for report files")
    p.add_argument("--match-radius", type=float, default=3.0)
    p.add_argument("--connectivity", type=int, default=8, choices=(4, 8))
    p.add_argument("--sweep", type=int, default=0,
                   help="emit sweep.csv with N+1 thresholds over soft maps")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("schedule-export", help="dump a (t, beta) table")
    p.add_argument("--kind", choices=("linear", "constant"), default="linear")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--beta-start", type=float, required=True)
    p.add_argument("--beta-end", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_schedule_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ToolkitError as exc:
        print(f"ERROR {exc.category}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)


if __name__ == "__main__":
    sys.exit(main())
