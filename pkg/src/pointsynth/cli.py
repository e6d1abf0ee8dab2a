"""Command-line entry point: generate, decode, eval, validate, inspect.

Exit codes: 0 on success, 1 on fatal errors, 2 when validation finds failing
samples.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .attention import SegmentLayout, build_attention_mask, format_mask
from .dataset import read_manifest, validate_dataset
from .errors import PointsynthError, UnknownSample
from .fixtures import FixtureConfig, make_demo_scenes
from .oracle import evaluate
from .pipeline import (
    decode_dataset,
    load_config,
    predictions_as_results,
    run_generation,
    supervision_of,
)
from .report import describe_sample, write_eval_report, write_overlay_frames
from .scene import load_scene


def _cmd_generate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, seed=args.seed, workers=args.workers)
    summary = run_generation(cfg)
    print(f"dataset:    {summary.out_dir}")
    print(f"manifest:   {summary.manifest_path}")
    print(f"config:     {summary.config_hash} (seed {summary.global_seed})")
    print(f"generated:  {summary.generated}/{summary.requested}")
    for reason, count in sorted(summary.skipped.items()):
        print(f"  skipped {reason}: {count}")
    print(
        f"wall time:  {summary.wall_time_s:.1f} s"
        f" ({summary.samples_per_min:.1f} samples/min)"
    )
    return 0


def _cmd_decode(args: argparse.Namespace) -> int:
    predictions = decode_dataset(
        args.dataset, stride=args.stride, t_min=args.t_min, scenes_dir=args.scenes
    )
    n = len(predictions["samples"])
    unresolved = sum(
        1
        for s in predictions["samples"]
        for t in s["per_target"]
        if t["candidate_index"] is None
    )
    print(f"decoded {n} samples -> {Path(args.dataset) / 'predictions.json'}")
    if unresolved:
        print(f"unresolved targets: {unresolved}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    manifest = read_manifest(Path(args.dataset) / "manifest.jsonl")
    predictions = json.loads(Path(args.pred).read_text())
    report = evaluate(predictions_as_results(predictions), supervision_of(manifest))
    out_dir = Path(args.out) if args.out else Path(args.dataset) / "eval"
    paths = write_eval_report(report, out_dir)
    print(f"n_samples:      {report.n_samples}")
    print(f"accuracy:       {report.accuracy:.1f}")
    print(f"progress_score: {report.progress_score:.1f}")
    for name in ("report", "csv", "fig_summary", "fig_progress", "fig_distance"):
        print(f"  {paths[name]}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    report = validate_dataset(args.dataset)
    print(f"validated {report.n_samples} samples: {report.n_failed} failed")
    for failure in report.failures:
        print(f"  {failure['sample_id']}:")
        for err in failure["errors"]:
            print(f"    - {err}")
    return 0 if report.ok else 2


def _cmd_inspect(args: argparse.Namespace) -> int:
    if args.topic == "mask":
        if not args.layout:
            raise PointsynthError("inspect mask requires --layout a,b,c,d")
        parts = [int(x) for x in args.layout.split(",")]
        if len(parts) != 4:
            raise PointsynthError("--layout takes exactly four integers")
        layout = SegmentLayout(*parts, allow_act_to_int=args.act_to_int)
        print(format_mask(build_attention_mask(layout)))
        return 0
    if args.topic is not None:
        raise PointsynthError(f"unknown inspect topic {args.topic!r}")
    if not args.dataset or not args.sample:
        raise PointsynthError("inspect requires --dataset and --sample (or 'mask')")

    dataset_dir = Path(args.dataset)
    manifest = read_manifest(dataset_dir / "manifest.jsonl")
    rec = manifest.find(args.sample)  # raises UnknownSample
    print(describe_sample(rec))
    if args.overlay:
        scenes_dir = args.scenes or manifest.headers[0].get("scenes_dir")
        if not scenes_dir:
            raise PointsynthError("no scenes_dir in the header; pass --scenes")
        scene = load_scene(Path(scenes_dir) / rec["scene_id"])
        overlay_dir = write_overlay_frames(rec, scene, dataset_dir)
        print(f"overlay frames: {overlay_dir}")
    return 0


def _cmd_make_scenes(args: argparse.Namespace) -> int:
    cfg = FixtureConfig(n_blocks=args.blocks, n_plates=args.plates)
    dirs = make_demo_scenes(args.out, count=args.count, seed=args.seed, cfg=cfg)
    print(f"wrote {len(dirs)} scenes under {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointsynth",
        description="Synthesize pointing-gesture instruction datasets over "
        "RGB-D scenes and decode them with a geometric oracle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a dataset from a run config")
    p.add_argument("--config", required=True, help="run config JSON path")
    p.add_argument("--seed", type=int, default=None, help="override global_seed")
    p.add_argument("--workers", type=int, default=None, help="override worker count")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("decode", help="resolve stored keyframes with the oracle")
    p.add_argument("--dataset", required=True)
    p.add_argument("--stride", type=int, default=4, help="candidate cloud stride, px")
    p.add_argument("--t-min", type=float, default=0.0, dest="t_min")
    p.add_argument("--scenes", default=None, help="override the scene root")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("eval", help="score predictions against supervision")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pred", required=True, help="predictions JSON path")
    p.add_argument("--out", default=None, help="report directory (default: dataset/eval)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("validate", help="re-check every sample invariant")
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("inspect", help="dump one sample, or 'mask' for attention masks")
    p.add_argument("topic", nargs="?", default=None, help="'mask' or omitted")
    p.add_argument("--dataset", default=None)
    p.add_argument("--sample", default=None)
    p.add_argument("--overlay", action="store_true", help="write annotated frames")
    p.add_argument("--scenes", default=None, help="override the scene root")
    p.add_argument("--layout", default=None, help="mask layout a,b,c,d")
    p.add_argument(
        "--act-to-int",
        action="store_true",
        help="let action rows attend instruction columns",
    )
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("make-scenes", help="write synthetic demo scenes")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blocks", type=int, default=5)
    p.add_argument("--plates", type=int, default=2)
    p.set_defaults(func=_cmd_make_scenes)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnknownSample as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except PointsynthError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
