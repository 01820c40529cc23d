"""End-to-end orchestration: propose -> [augment] -> group -> rank -> eval.

Per-image work is pure, so stages optionally fan out over a process pool;
results are collected in input order to keep artifacts byte-deterministic.
The inference mode starts from an externally supplied parts file and never
touches the unsupervised proposal stage.
"""

from __future__ import annotations

import re
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from .config import PipelineConfig
from .errors import InputFileError, SchemaError
from .evaluation import EvalReport, evaluate
from .features import FeatureConfig, handcrafted_pyramid, load_pyramid
from .grouping import GroupingConfig, group_pipeline
from .masks import BinaryMask, Proposal, Provenance
from .proposals import SegParams, graph_segment, grid_proposals
from .proposals.selective import _dedup_by_box, selective_search_with_levels
from .ranking import RankConfig, fuse_score, rank
from .schemas import (
    ImageProposals,
    gt_from_json,
    gt_label_sets,
    load_json,
    proposal_to_json,
    proposals_from_json,
    proposals_to_json,
    report_table,
    report_to_json,
    result_record,
    results_from_json,
    results_to_json,
    write_json,
)
from .supervision import AugmentationConfig, augment_labels

IMAGE_SUFFIXES = (".png", ".ppm")


def list_images(input_dir: str | Path) -> list[tuple[int, str, Path]]:
    """(image_id, file_name, path) for every image in the directory.

    Ids come from the trailing digit group of the stem when unique, otherwise
    enumeration order; listing is sorted by file name for determinism.
    """
    d = Path(input_dir)
    if not d.is_dir():
        raise InputFileError(f"input directory not found: {d}")
    paths = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise InputFileError(f"no {'/'.join(IMAGE_SUFFIXES)} images in {d}")
    ids = []
    for p in paths:
        m = re.search(r"(\d+)$", p.stem)
        ids.append(int(m.group(1)) if m else None)
    if any(i is None for i in ids) or len(set(ids)) != len(ids):
        ids = list(range(len(paths)))
    return [(i, p.name, p) for i, p in zip(ids, paths)]


def load_image(path: str | Path) -> np.ndarray:
    try:
        return np.asarray(Image.open(path).convert("RGB"))
    except FileNotFoundError as exc:
        raise InputFileError(f"image not found: {path}") from exc


# ---------------------------------------------------------------------------
# propose
# ---------------------------------------------------------------------------

def _propose_one(job) -> ImageProposals:
    image_id, file_name, path, algo, params, weights, cell = job
    img = load_image(path)
    h, w = img.shape[:2]
    if algo == "selsearch":
        props, levels = selective_search_with_levels(img, params, weights)
    elif algo == "fzs":
        labels = graph_segment(img, params)
        props = _dedup_by_box(
            [
                Proposal.from_mask(
                    BinaryMask(labels == i), provenance=Provenance.UNSUPERVISED
                )
                for i in range(int(labels.max()) + 1)
            ]
        )
        levels = [0] * len(props)
    elif algo == "grid":
        props = grid_proposals(h, w, cell)
        levels = [0] * len(props)
    else:
        raise ValueError(f"unknown algo {algo!r}")
    return ImageProposals(
        image_id=image_id,
        file_name=file_name,
        height=h,
        width=w,
        proposals=props,
        group_ids=None,
        affinity=None,
        levels=levels,
    )


def run_propose(
    input_dir: str | Path,
    algo: str = "selsearch",
    params: SegParams = SegParams(),
    weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0),
    cell: int = 64,
    workers: int = 1,
) -> list[ImageProposals]:
    jobs = [
        (image_id, name, path, algo, params, weights, cell)
        for image_id, name, path in list_images(input_dir)
    ]
    return _map_jobs(_propose_one, jobs, workers)


def _map_jobs(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (workers * 4))))


# ---------------------------------------------------------------------------
# group
# ---------------------------------------------------------------------------

def _group_one(job) -> ImageProposals:
    im, image_path, features_spec, gcfg, max_part_frac, dump_affinity = job
    if features_spec == "handcrafted":
        img = load_image(image_path)
        pyramid = handcrafted_pyramid(img, FeatureConfig())
    else:
        tensor_dir = features_spec.split(":", 1)[1]
        pyr_path = Path(tensor_dir) / (Path(im.file_name).stem + ".fpyr")
        pyramid = load_pyramid(pyr_path)
    if pyramid.image_height != im.height or pyramid.image_width != im.width:
        raise SchemaError(
            f"image {im.image_id}: pyramid is {pyramid.image_height}x{pyramid.image_width}, "
            f"expected {im.height}x{im.width}"
        )

    area_cap = max_part_frac * im.height * im.width
    levels = im.levels if im.levels is not None else [0] * len(im.proposals)
    part_idx = [
        i
        for i, (p, lvl) in enumerate(zip(im.proposals, levels))
        if lvl == 0 and p.mask.area <= area_cap
    ]
    rest_idx = [i for i in range(len(im.proposals)) if i not in set(part_idx)]
    parts = [im.proposals[i] for i in part_idx]

    if not parts:
        return ImageProposals(
            image_id=im.image_id,
            file_name=im.file_name,
            height=im.height,
            width=im.width,
            proposals=list(im.proposals),
            group_ids=[-1] * len(im.proposals),
            affinity=None,
            levels=levels,
        )

    result = group_pipeline(parts, pyramid, gcfg)
    group_of = {}
    for gi, g in enumerate(result.groups):
        for local in g:
            group_of[part_idx[local]] = gi

    out_props: list[Proposal] = []
    out_gids: list[int] = []
    out_levels: list[int] = []
    # originals (parts carry their cohesion-updated scores), in input order
    updated = {part_idx[i]: p for i, p in enumerate(result.proposals[: len(parts)])}
    for i, p in enumerate(im.proposals):
        out_props.append(updated.get(i, p))
        out_gids.append(group_of.get(i, -1))
        out_levels.append(levels[i])
    # merged proposals follow, tagged with their group id
    merged_gids = [gi for gi, g in enumerate(result.groups) if len(g) > 1]
    for gid, merged in zip(merged_gids, result.merged):
        out_props.append(merged)
        out_gids.append(gid)
        out_levels.append(1)

    return ImageProposals(
        image_id=im.image_id,
        file_name=im.file_name,
        height=im.height,
        width=im.width,
        proposals=out_props,
        group_ids=out_gids,
        affinity=result.affinity_matrix if dump_affinity else None,
        levels=out_levels,
    )


def run_group(
    images: list[ImageProposals],
    input_dir: str | Path | None,
    features_spec: str = "handcrafted",
    gcfg: GroupingConfig = GroupingConfig(),
    max_part_area_frac: float = 0.35,
    workers: int = 1,
    dump_affinity: bool = False,
) -> list[ImageProposals]:
    jobs = []
    for im in images:
        image_path = None
        if features_spec == "handcrafted":
            if input_dir is None:
                raise InputFileError("handcrafted features need --input (images directory)")
            image_path = Path(input_dir) / im.file_name
        jobs.append((im, image_path, features_spec, gcfg, max_part_area_frac, dump_affinity))
    return _map_jobs(_group_one, jobs, workers)


# ---------------------------------------------------------------------------
# rank / eval / augment
# ---------------------------------------------------------------------------

def run_rank(images: list[ImageProposals], rcfg: RankConfig = RankConfig()) -> list[dict]:
    records = []
    for im in sorted(images, key=lambda r: r.image_id):
        ranked = rank(im.proposals, rcfg)
        for p in ranked:
            records.append(
                result_record(im.image_id, p, fuse_score(p.score_c, p.score_b, p.score_m))
            )
    return records


def run_eval(
    gt_path: str | Path,
    results_obj: dict,
    ks: tuple[int, ...],
    kinds: tuple[str, ...],
) -> EvalReport:
    gt_obj = load_json(gt_path)
    _, gt_insts = gt_from_json(gt_obj)
    preds = results_from_json(results_obj)
    report = EvalReport()
    for kind in kinds:
        report = report.merged_with(evaluate(gt_insts, preds, ks=list(ks), kind=kind))
    return report


def run_augment(
    gt_path: str | Path,
    proposals_path: str | Path,
    iou_thresh: float,
    out_path: str | Path,
) -> dict:
    """Merge ground truth with surviving proposals into a class-agnostic
    COCO-style annotation file."""
    gt_obj = load_json(gt_path)
    gt_sets = gt_label_sets(gt_obj)
    prop_images = proposals_from_json(load_json(proposals_path))
    cfg = AugmentationConfig(iou_exclude_threshold=iou_thresh)

    from .masks import LabelSet

    annotations = []
    ann_id = 1
    for im in sorted(prop_images, key=lambda r: r.image_id):
        gt_set = gt_sets.get(im.image_id, LabelSet(()))
        unsup = LabelSet(tuple(p for p in im.proposals))
        augmented = augment_labels(gt_set, unsup, cfg)
        for p in augmented:
            x, y, w, h = p.box.to_xywh()
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": im.image_id,
                    "category_id": 1,
                    "bbox": [round(v, 4) for v in (x, y, w, h)],
                    "area": p.mask.area,
                    "segmentation": proposal_to_json(p)["segmentation"],
                    "iscrowd": 0,
                    "ignore": 0,
                    "provenance": p.provenance.value,
                }
            )
            ann_id += 1
    out = {
        "schema_version": 1,
        "images": gt_obj.get("images", []),
        "annotations": annotations,
        "categories": [{"id": 1, "name": "object"}],
    }
    write_json(out_path, out)
    return out


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------

def run_pipeline(cfg: PipelineConfig) -> EvalReport | None:
    """Execute the configured flow and write artifacts into cfg.out_dir.

    bottomup: propose -> group -> rank [-> eval]
    inference: read parts_file -> group -> rank [-> eval]; the proposal stage
    is never invoked and its artifacts are never read.
    """
    cfg.validate()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if cfg.mode == "bottomup":
        images = run_propose(
            cfg.input, cfg.algo, cfg.seg_params(), cfg.weights, cfg.cell, cfg.workers
        )
        write_json(out_dir / "proposals.json", proposals_to_json(images))
        input_dir = cfg.input
    else:
        images = proposals_from_json(load_json(cfg.parts_file), where="parts")
        input_dir = cfg.input or None

    grouped = run_group(
        images,
        input_dir,
        cfg.features,
        cfg.grouping_config(),
        cfg.max_part_area_frac,
        cfg.workers,
    )
    write_json(out_dir / "grouped.json", proposals_to_json(grouped))

    records = run_rank(grouped, cfg.rank_config())
    results_obj = results_to_json(records)
    write_json(out_dir / "results.json", results_obj)

    if cfg.gt is None:
        return None
    report = run_eval(cfg.gt, results_obj, cfg.ks, cfg.kinds)
    write_json(out_dir / "report.json", report_to_json(report, list(cfg.ks)))
    (out_dir / "report.txt").write_text(report_table(report, list(cfg.ks)))
    return report
