"""Class-agnostic Average Recall over boxes and masks.

Protocol: per image, take the top-K predictions (already sorted by score);
for each IoU threshold in {0.50, 0.55, ..., 0.95} match predictions one-to-one
to ground truth greedily in score order, each prediction taking the
highest-IoU unmatched ground truth with IoU >= t. Recall(t) is matched GT
over total GT across the dataset; AR@K is the mean of the 10 recalls.
Ground-truth entries flagged ignore can absorb predictions without counting
toward totals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import PredictionOrderError, UnknownImageError
from .masks import BinaryMask, Box, box_iou, mask_iou_pairs

IOU_THRESHOLDS: tuple[float, ...] = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class EvalInstance:
    """One ground-truth or predicted instance for evaluation."""

    box: Box
    mask: BinaryMask | None = None
    score: float = 0.0
    ignore: bool = False


@dataclass(frozen=True)
class EvalReport:
    ar_box: dict[int, float] = field(default_factory=dict)
    ar_mask: dict[int, float] = field(default_factory=dict)
    per_threshold_recall: dict[str, dict[int, dict[float, float]]] = field(default_factory=dict)
    matched_counts: dict[str, dict[int, dict[float, int]]] = field(default_factory=dict)
    total_gt: int = 0

    def merged_with(self, other: "EvalReport") -> "EvalReport":
        return EvalReport(
            ar_box={**self.ar_box, **other.ar_box},
            ar_mask={**self.ar_mask, **other.ar_mask},
            per_threshold_recall={**self.per_threshold_recall, **other.per_threshold_recall},
            matched_counts={**self.matched_counts, **other.matched_counts},
            total_gt=max(self.total_gt, other.total_gt),
        )


def _iou_matrix(
    preds: Sequence[EvalInstance], gts: Sequence[EvalInstance], kind: str
) -> np.ndarray:
    if kind == "box":
        out = np.zeros((len(preds), len(gts)))
        for i, p in enumerate(preds):
            for j, g in enumerate(gts):
                out[i, j] = box_iou(p.box, g.box)
        return out
    out = np.zeros((len(preds), len(gts)))
    gmasks = [g.mask for g in gts]
    gboxes = [g.box for g in gts]
    for i, p in enumerate(preds):
        out[i] = mask_iou_pairs(p.mask, p.box, gmasks, gboxes, lower_bound=IOU_THRESHOLDS[0])
    return out


def _greedy_match_counts(iou: np.ndarray, gt_ignore: np.ndarray) -> dict[float, int]:
    """Matched non-ignore GT per threshold; predictions iterate in given order."""
    n_pred, n_gt = iou.shape
    counts: dict[float, int] = {}
    real = ~gt_ignore
    n_real = int(real.sum())
    for t in IOU_THRESHOLDS:
        matched = np.zeros(n_gt, dtype=bool)
        hit = 0
        for i in range(n_pred):
            row = iou[i]
            cand = real & ~matched & (row >= t)
            if cand.any():
                j = int(np.argmax(np.where(cand, row, -1.0)))
                matched[j] = True
                hit += 1
                if hit == n_real:
                    break
            # otherwise the prediction may fall on an ignore region; ignore
            # entries absorb without counting and without exclusivity
        counts[t] = hit
    return counts


def evaluate(
    gt: Mapping[int, Sequence[EvalInstance]],
    preds: Mapping[int, Sequence[EvalInstance]],
    ks: Sequence[int],
    kind: str = "mask",
) -> EvalReport:
    """AR@K for each K in ks, over the given kind ("box" or "mask")."""
    if kind not in ("box", "mask"):
        raise ValueError(f"kind must be 'box' or 'mask', got {kind!r}")
    unknown = set(preds) - set(gt)
    if unknown:
        raise UnknownImageError(unknown)
    for img_id, plist in preds.items():
        scores = [p.score for p in plist]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise PredictionOrderError(
                f"predictions for image {img_id} are not sorted by descending score"
            )
    if kind == "mask":
        for img_id in preds:
            for inst in list(preds[img_id]) + list(gt[img_id]):
                if inst.mask is None:
                    raise ValueError(f"mask evaluation needs masks (image {img_id})")

    ks = sorted(set(int(k) for k in ks))
    total_gt = sum(sum(1 for g in insts if not g.ignore) for insts in gt.values())
    matched: dict[int, dict[float, int]] = {k: {t: 0 for t in IOU_THRESHOLDS} for k in ks}

    max_k = max(ks) if ks else 0
    for img_id, gts in gt.items():
        plist = list(preds.get(img_id, ()))[:max_k]
        if not plist or not gts:
            continue
        gt_ignore = np.array([g.ignore for g in gts], dtype=bool)
        iou = _iou_matrix(plist, gts, kind)
        for k in ks:
            sub = iou[:k]
            for t, hit in _greedy_match_counts(sub, gt_ignore).items():
                matched[k][t] += hit

    recalls = {
        k: {t: (matched[k][t] / total_gt if total_gt else 0.0) for t in IOU_THRESHOLDS}
        for k in ks
    }
    ar = {k: float(np.mean([recalls[k][t] for t in IOU_THRESHOLDS])) for k in ks}

    report = EvalReport(
        ar_box=ar if kind == "box" else {},
        ar_mask=ar if kind == "mask" else {},
        per_threshold_recall={kind: recalls},
        matched_counts={kind: matched},
        total_gt=total_gt,
    )
    return report
