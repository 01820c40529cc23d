"""Uniform-grid baseline: non-overlapping square patches tiling the image."""

from __future__ import annotations

import numpy as np

from ..masks import BinaryMask, Proposal, Provenance


def grid_proposals(image_h: int, image_w: int, cell: int) -> list[Proposal]:
    """cell x cell square masks tiling the image; edge cells clipped."""
    if cell < 1:
        raise ValueError(f"cell must be >= 1, got {cell}")
    if image_h < 1 or image_w < 1:
        raise ValueError(f"image extent must be positive, got {image_h}x{image_w}")
    out = []
    for r0 in range(0, image_h, cell):
        for c0 in range(0, image_w, cell):
            r1 = min(r0 + cell, image_h)
            c1 = min(c0 + cell, image_w)
            canvas = np.zeros((image_h, image_w), dtype=bool)
            canvas[r0:r1, c0:c1] = True
            out.append(
                Proposal.from_mask(BinaryMask(canvas), provenance=Provenance.UNSUPERVISED)
            )
    return out
