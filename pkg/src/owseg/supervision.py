"""Builds augmented label sets: ground truth plus unsupervised proposals,
excluding proposals that duplicate a ground-truth mask.

Exclusion uses mask IoU with a strict "greater than" rule: a proposal whose
best IoU against ground truth is exactly the threshold is kept.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ShapeMismatchError
from .masks import LabelSet, Proposal, mask_iou


@dataclass(frozen=True)
class AugmentationConfig:
    iou_exclude_threshold: float = 0.9

    def __post_init__(self):
        if not (0.0 <= self.iou_exclude_threshold <= 1.0):
            raise ValueError(
                f"iou_exclude_threshold must lie in [0, 1], got {self.iou_exclude_threshold}"
            )


def augment_labels(
    gt: LabelSet, unsup: LabelSet, cfg: AugmentationConfig = AugmentationConfig()
) -> LabelSet:
    """Ground truth first, then unsupervised entries whose mask IoU against
    every ground-truth mask stays at or below the threshold."""
    shapes = {p.mask.shape for p in gt} | {p.mask.shape for p in unsup}
    if len(shapes) > 1:
        raise ShapeMismatchError(f"label sets mix image dimensions: {sorted(shapes)}")

    thr = cfg.iou_exclude_threshold
    kept: list[Proposal] = list(gt.entries)
    for u in unsup:
        if all(mask_iou(u.mask, s.mask) <= thr for s in gt):
            kept.append(u)
    return LabelSet(tuple(kept))
