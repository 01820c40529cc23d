"""Final proposal scoring (geometric-mean fusion), duplicate suppression,
and top-K selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ScoreRangeError
from .masks import Proposal, box_iou, mask_iou_pairs


@dataclass(frozen=True)
class RankConfig:
    top_k: int = 100
    dedup_iou: float = 0.95
    use_box_iou: bool = False

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        if not (0.0 <= self.dedup_iou <= 1.0):
            raise ValueError(f"dedup_iou must lie in [0, 1], got {self.dedup_iou}")


def fuse_score(c: float, b: float, m: float) -> float:
    """Geometric mean of the three score components."""
    for name, v in (("c", c), ("b", b), ("m", m)):
        if not (0.0 <= v <= 1.0):
            raise ScoreRangeError(f"score {name}={v} outside [0, 1]")
    return (c * b * m) ** (1.0 / 3.0)


def rank(proposals: Sequence[Proposal], cfg: RankConfig = RankConfig()) -> list[Proposal]:
    """Sort by fused score (ties: larger mask area, then input order), suppress
    duplicates above dedup_iou keeping the higher-scored, truncate to top_k."""
    scored = [
        (fuse_score(p.score_c, p.score_b, p.score_m), p.mask.area, i, p)
        for i, p in enumerate(proposals)
    ]
    scored.sort(key=lambda t: (-t[0], -t[1], t[2]))

    kept: list[Proposal] = []
    kept_boxes = []
    for _, _, _, p in scored:
        if kept:
            if cfg.use_box_iou:
                ious = np.array([box_iou(p.box, b) for b in kept_boxes])
            else:
                ious = mask_iou_pairs(
                    p.mask, p.box, [q.mask for q in kept], kept_boxes, lower_bound=cfg.dedup_iou
                )
            if (ious > cfg.dedup_iou).any():
                continue
        kept.append(p)
        kept_boxes.append(p.box)
        if len(kept) == cfg.top_k:
            break
    return kept
