"""JSON artifact schemas shared by the CLI stages and bindings.

All writers emit deterministic bytes (sorted keys, fixed ordering) and stamp
a schema_version field. Readers accept plain COCO files for ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputFileError, SchemaError
from .evaluation import EvalInstance, EvalReport
from .masks import (
    Box,
    LabelSet,
    Proposal,
    Provenance,
    decode_segmentation,
    encode_segmentation,
)

SCHEMA_VERSION = 1


@dataclass
class ImageProposals:
    """Per-image proposal record as carried by proposals/grouped JSON.

    levels mark hierarchy depth: 0 for oversegmentation leaves (the "parts"
    the grouping stage consumes), 1 for merged regions.
    """

    image_id: int
    file_name: str
    height: int
    width: int
    proposals: list[Proposal] = field(default_factory=list)
    group_ids: list[int] | None = None
    affinity: np.ndarray | None = None
    levels: list[int] | None = None


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path: str | Path):
    p = Path(path)
    if not p.is_file():
        raise InputFileError(f"input file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{p}: not valid JSON ({exc})") from exc


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"{where}: missing key {key!r}")
    return obj[key]


# ---------------------------------------------------------------------------
# proposals / grouped
# ---------------------------------------------------------------------------

def proposal_to_json(p: Proposal, compressed_rle: bool = False) -> dict:
    return {
        "bbox": [round(v, 4) for v in p.box.to_xywh()],
        "segmentation": encode_segmentation(p.mask, compressed=compressed_rle),
        "provenance": p.provenance.value,
        "scores": {"c": p.score_c, "b": p.score_b, "m": p.score_m},
    }


def proposal_from_json(obj: dict, where: str) -> Proposal:
    seg = _require(obj, "segmentation", where)
    try:
        mask = decode_segmentation(seg)
    except Exception as exc:
        raise SchemaError(f"{where}: bad segmentation ({exc})") from exc
    bbox = _require(obj, "bbox", where)
    if not (isinstance(bbox, list) and len(bbox) == 4):
        raise SchemaError(f"{where}: bbox must be [x, y, w, h], got {bbox!r}")
    box = Box.from_xywh(*[float(v) for v in bbox])
    prov = Provenance(obj.get("provenance", "unsupervised"))
    scores = obj.get("scores", {})
    return Proposal(
        box=box,
        mask=mask,
        score_c=float(scores.get("c", 1.0)),
        score_b=float(scores.get("b", 1.0)),
        score_m=float(scores.get("m", 1.0)),
        provenance=prov,
    )


def proposals_to_json(images: list[ImageProposals]) -> dict:
    recs = []
    for im in images:
        rec = {
            "image_id": im.image_id,
            "file_name": im.file_name,
            "height": im.height,
            "width": im.width,
            "proposals": [proposal_to_json(p) for p in im.proposals],
        }
        if im.group_ids is not None:
            if len(im.group_ids) != len(im.proposals):
                raise SchemaError(
                    f"image {im.image_id}: {len(im.group_ids)} group ids for "
                    f"{len(im.proposals)} proposals"
                )
            for p, g in zip(rec["proposals"], im.group_ids):
                p["group_id"] = g
        if im.levels is not None:
            if len(im.levels) != len(im.proposals):
                raise SchemaError(
                    f"image {im.image_id}: {len(im.levels)} levels for "
                    f"{len(im.proposals)} proposals"
                )
            for p, lvl in zip(rec["proposals"], im.levels):
                p["level"] = lvl
        if im.affinity is not None:
            rec["affinity"] = [[round(float(v), 6) for v in row] for row in im.affinity]
        recs.append(rec)
    return {"schema_version": SCHEMA_VERSION, "images": recs}


def proposals_from_json(obj: dict, where: str = "proposals") -> list[ImageProposals]:
    images = _require(obj, "images", where)
    out = []
    for idx, rec in enumerate(images):
        w = f"{where}.images[{idx}]"
        image_id = int(_require(rec, "image_id", w))
        height = int(_require(rec, "height", w))
        width = int(_require(rec, "width", w))
        plist = []
        gids = []
        levels = []
        has_gid = False
        has_level = False
        for j, pobj in enumerate(_require(rec, "proposals", w)):
            p = proposal_from_json(pobj, f"{w}.proposals[{j}]")
            if p.mask.shape != (height, width):
                raise SchemaError(
                    f"{w}.proposals[{j}]: mask {p.mask.shape} does not match "
                    f"image {height}x{width}"
                )
            plist.append(p)
            if "group_id" in pobj:
                has_gid = True
                gids.append(int(pobj["group_id"]))
            else:
                gids.append(-1)
            if "level" in pobj:
                has_level = True
                levels.append(int(pobj["level"]))
            else:
                levels.append(0)
        aff = rec.get("affinity")
        out.append(
            ImageProposals(
                image_id=image_id,
                file_name=str(rec.get("file_name", f"{image_id}")),
                height=height,
                width=width,
                proposals=plist,
                group_ids=gids if has_gid else None,
                affinity=np.asarray(aff, dtype=np.float64) if aff is not None else None,
                levels=levels if has_level else None,
            )
        )
    return out


# ---------------------------------------------------------------------------
# COCO-style ground truth
# ---------------------------------------------------------------------------

def gt_to_json(images: list[dict], annotations: list[dict]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "images": images,
        "annotations": annotations,
        "categories": [{"id": 1, "name": "object"}],
    }


def gt_from_json(obj: dict, where: str = "gt"):
    """-> (images: {id: {file_name, height, width}}, per-image EvalInstance lists)."""
    images = {}
    for idx, rec in enumerate(_require(obj, "images", where)):
        w = f"{where}.images[{idx}]"
        images[int(_require(rec, "id", w))] = {
            "file_name": rec.get("file_name", ""),
            "height": int(_require(rec, "height", w)),
            "width": int(_require(rec, "width", w)),
        }
    insts: dict[int, list[EvalInstance]] = {i: [] for i in images}
    for idx, ann in enumerate(_require(obj, "annotations", where)):
        w = f"{where}.annotations[{idx}]"
        img_id = int(_require(ann, "image_id", w))
        if img_id not in images:
            raise SchemaError(f"{w}: unknown image_id {img_id}")
        seg = ann.get("segmentation")
        mask = None
        if seg is not None:
            try:
                mask = decode_segmentation(seg)
            except Exception as exc:
                raise SchemaError(f"{w}: bad segmentation ({exc})") from exc
            dims = (images[img_id]["height"], images[img_id]["width"])
            if mask.shape != dims:
                raise SchemaError(f"{w}: mask {mask.shape} does not match image {dims}")
        bbox = _require(ann, "bbox", w)
        box = Box.from_xywh(*[float(v) for v in bbox])
        ignore = bool(ann.get("ignore", 0)) or bool(ann.get("iscrowd", 0))
        insts[img_id].append(EvalInstance(box=box, mask=mask, ignore=ignore))
    return images, insts


def gt_label_sets(obj: dict) -> dict[int, LabelSet]:
    """Ground-truth annotations as per-image LabelSets (masks required)."""
    images, insts = gt_from_json(obj)
    out = {}
    for img_id, lst in insts.items():
        entries = []
        for inst in lst:
            if inst.mask is None:
                raise SchemaError(f"gt annotation for image {img_id} lacks a mask")
            entries.append(
                Proposal(
                    box=inst.mask.tight_box() or inst.box,
                    mask=inst.mask,
                    provenance=Provenance.GROUND_TRUTH,
                )
            )
        out[img_id] = LabelSet(tuple(entries))
    return out


# ---------------------------------------------------------------------------
# ranked results (COCO-results-style records)
# ---------------------------------------------------------------------------

def results_to_json(records: list[dict]) -> dict:
    return {"schema_version": SCHEMA_VERSION, "results": records}


def result_record(image_id: int, p: Proposal, score: float) -> dict:
    return {
        "image_id": image_id,
        "category_id": 1,
        "bbox": [round(v, 4) for v in p.box.to_xywh()],
        "segmentation": encode_segmentation(p.mask),
        "score": round(float(score), 8),
    }


def results_from_json(obj: dict, where: str = "results"):
    """-> {image_id: [EvalInstance...]} in stored order."""
    records = _require(obj, "results", where)
    out: dict[int, list[EvalInstance]] = {}
    for idx, rec in enumerate(records):
        w = f"{where}.results[{idx}]"
        img_id = int(_require(rec, "image_id", w))
        seg = rec.get("segmentation")
        mask = decode_segmentation(seg) if seg is not None else None
        box = Box.from_xywh(*[float(v) for v in _require(rec, "bbox", w)])
        out.setdefault(img_id, []).append(
            EvalInstance(box=box, mask=mask, score=float(_require(rec, "score", w)))
        )
    return out


# ---------------------------------------------------------------------------
# evaluation report
# ---------------------------------------------------------------------------

def report_to_json(report: EvalReport, ks: list[int]) -> dict:
    def fmt_recalls(tree):
        return {
            kind: {str(k): {f"{t:.2f}": v for t, v in tmap.items()} for k, tmap in kmap.items()}
            for kind, kmap in tree.items()
        }

    return {
        "schema_version": SCHEMA_VERSION,
        "ks": sorted(ks),
        "ar_box": {str(k): v for k, v in sorted(report.ar_box.items())},
        "ar_mask": {str(k): v for k, v in sorted(report.ar_mask.items())},
        "per_threshold_recall": fmt_recalls(report.per_threshold_recall),
        "matched_counts": fmt_recalls(report.matched_counts),
        "total_gt": report.total_gt,
    }


def report_table(report: EvalReport, ks: list[int]) -> str:
    """Plain-text table mirroring AR columns for boxes and masks."""
    ks = sorted(ks)
    headers = [f"AR_B@{k}" for k in ks] + [f"AR_M@{k}" for k in ks]
    values = [report.ar_box.get(k) for k in ks] + [report.ar_mask.get(k) for k in ks]
    cells = ["   n/a" if v is None else f"{v:.4f}" for v in values]
    widths = [max(len(h), len(c)) for h, c in zip(headers, cells)]
    line1 = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    line2 = "  ".join(c.rjust(w) for c, w in zip(cells, widths))
    return line1 + "\n" + line2 + "\n"
