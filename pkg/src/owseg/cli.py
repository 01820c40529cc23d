"""Command-line interface.

Subcommands mirror the pipeline stages; every failure exits nonzero with a
machine-readable JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .errors import OwsegError
from .grouping import GroupingConfig
from .pipeline import (
    run_augment,
    run_eval,
    run_group,
    run_pipeline,
    run_propose,
    run_rank,
)
from .proposals import SegParams
from .ranking import RankConfig
from .schemas import (
    load_json,
    proposals_from_json,
    proposals_to_json,
    report_table,
    report_to_json,
    results_from_json,
    results_to_json,
    write_json,
)


def _parse_weights(text: str) -> tuple[float, float, float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("weights must be four comma-separated numbers")
    return tuple(parts)  # type: ignore[return-value]


def _parse_ks(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="owseg", description=__doc__)
    ap.add_argument("--version", action="version", version=f"owseg {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("propose", help="generate bottom-up mask proposals")
    p.add_argument("--input", required=True, help="directory of PNG/PPM images")
    p.add_argument("--algo", choices=["selsearch", "fzs", "grid"], default="selsearch")
    p.add_argument("--k", type=float, default=50.0, help="segmentation scale constant")
    p.add_argument("--sigma", type=float, default=0.8)
    p.add_argument("--min-size", type=int, default=20)
    p.add_argument("--cell", type=int, default=64, help="grid cell size (algo=grid)")
    p.add_argument("--weights", type=_parse_weights, default=(1.0, 1.0, 1.0, 1.0))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("augment", help="merge ground truth with proposals")
    p.add_argument("--gt", required=True)
    p.add_argument("--proposals", required=True)
    p.add_argument("--iou-thresh", type=float, default=0.9)
    p.add_argument("--out", required=True)

    p = sub.add_parser("group", help="group part proposals into objects")
    p.add_argument("--parts", required=True, help="proposals JSON with part records")
    p.add_argument("--input", default=None, help="images directory (handcrafted features)")
    p.add_argument("--features", default="handcrafted", help="handcrafted | tensor:DIR")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--no-keep-originals", action="store_true")
    p.add_argument("--max-part-area-frac", type=float, default=0.35)
    p.add_argument("--dump-affinity", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rank", help="fuse scores, suppress duplicates, take top-K")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--top-k", type=int, default=100)
    p.add_argument("--dedup-iou", type=float, default=0.95)
    p.add_argument("--use-box-iou", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="class-agnostic average recall")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--ks", type=_parse_ks, default=(100, 300))
    p.add_argument("--kind", choices=["box", "mask"], default="mask")
    p.add_argument("--out", required=True)

    p = sub.add_parser("render", help="overlay proposals on an image")
    p.add_argument("--image", required=True)
    p.add_argument("--pred", required=True, help="proposals/grouped or results JSON")
    p.add_argument("--image-id", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("pipeline", help="run the configured end-to-end flow")
    p.add_argument("--config", required=True)
    p.add_argument("--input", default=None)
    p.add_argument("--out-dir", dest="out_dir", default=None)
    p.add_argument("--gt", default=None)
    p.add_argument("--mode", choices=["bottomup", "inference"], default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--top-k", dest="top_k", type=int, default=None)

    p = sub.add_parser("fixtures", help="generate the bundled synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--num", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=160)
    p.add_argument("--width", type=int, default=160)
    return ap


def _cmd_propose(args) -> int:
    params = SegParams(scale_k=args.k, sigma=args.sigma, min_size=args.min_size)
    images = run_propose(args.input, args.algo, params, args.weights, args.cell, args.workers)
    write_json(args.out, proposals_to_json(images))
    return 0


def _cmd_augment(args) -> int:
    run_augment(args.gt, args.proposals, args.iou_thresh, args.out)
    return 0


def _cmd_group(args) -> int:
    images = proposals_from_json(load_json(args.parts), where="parts")
    gcfg = GroupingConfig(
        delta=args.delta, tau=args.tau, keep_originals=not args.no_keep_originals
    )
    grouped = run_group(
        images,
        args.input,
        args.features,
        gcfg,
        args.max_part_area_frac,
        args.workers,
        args.dump_affinity,
    )
    write_json(args.out, proposals_to_json(grouped))
    return 0


def _cmd_rank(args) -> int:
    images = proposals_from_json(load_json(args.in_path), where="rank input")
    rcfg = RankConfig(top_k=args.top_k, dedup_iou=args.dedup_iou, use_box_iou=args.use_box_iou)
    write_json(args.out, results_to_json(run_rank(images, rcfg)))
    return 0


def _cmd_eval(args) -> int:
    report = run_eval(args.gt, load_json(args.pred), args.ks, (args.kind,))
    write_json(args.out, report_to_json(report, list(args.ks)))
    sys.stdout.write(report_table(report, list(args.ks)))
    return 0


def _cmd_render(args) -> int:
    from .render import render_file

    obj = load_json(args.pred)
    name = Path(args.image).name
    if "images" in obj:
        images = proposals_from_json(obj, where="pred")
        match = [
            im
            for im in images
            if im.file_name == name or (args.image_id is not None and im.image_id == args.image_id)
        ]
        proposals = match[0].proposals if match else []
        gids = match[0].group_ids if match else None
    elif "results" in obj:
        if args.image_id is None:
            raise OwsegError("results JSON carries no file names; pass --image-id")
        preds = results_from_json(obj)
        from .masks import Proposal

        proposals = [
            Proposal(box=e.box, mask=e.mask) for e in preds.get(args.image_id, []) if e.mask
        ]
        gids = None
    else:
        raise OwsegError(f"{args.pred}: neither a proposals nor a results file")
    render_file(args.image, proposals, args.out, gids)
    return 0


def _cmd_pipeline(args) -> int:
    overrides = {
        "input": args.input,
        "out_dir": args.out_dir,
        "gt": args.gt,
        "mode": args.mode,
        "workers": args.workers,
        "delta": args.delta,
        "tau": args.tau,
        "top_k": args.top_k,
    }
    cfg = load_config(args.config, overrides)
    report = run_pipeline(cfg)
    if report is not None:
        sys.stdout.write(report_table(report, list(cfg.ks)))
    return 0


def _cmd_fixtures(args) -> int:
    from .synthetic import generate_dataset

    paths = generate_dataset(
        args.out, num_images=args.num, seed=args.seed, height=args.height, width=args.width
    )
    sys.stdout.write(json.dumps(paths, indent=2, sort_keys=True) + "\n")
    return 0


_HANDLERS = {
    "propose": _cmd_propose,
    "augment": _cmd_augment,
    "group": _cmd_group,
    "rank": _cmd_rank,
    "eval": _cmd_eval,
    "render": _cmd_render,
    "pipeline": _cmd_pipeline,
    "fixtures": _cmd_fixtures,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.cmd](args)
    except OwsegError as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
        return 2
    except FileNotFoundError as exc:
        record = {"error": "FileNotFoundError", "message": str(exc)}
        sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
