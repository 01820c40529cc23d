"""Overlay rendering: tint instance masks and annotate group ids."""

from __future__ import annotations

import shutil
import warnings
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .masks import Proposal

PALETTE = [
    (230, 60, 60),
    (60, 160, 230),
    (70, 200, 90),
    (240, 180, 40),
    (170, 90, 220),
    (250, 120, 40),
    (60, 210, 200),
    (230, 90, 170),
    (150, 190, 60),
    (110, 110, 250),
    (200, 140, 90),
    (90, 140, 110),
]
_ALPHA = 0.45


def render_overlay(
    image: np.ndarray,
    proposals: list[Proposal],
    group_ids: list[int] | None = None,
) -> np.ndarray:
    """Tint each proposal mask with a palette color; label group ids if given."""
    out = image.astype(np.float64).copy()
    for i, p in enumerate(proposals):
        color = np.array(PALETTE[i % len(PALETTE)], dtype=np.float64)
        sel = p.mask.data
        out[sel] = (1 - _ALPHA) * out[sel] + _ALPHA * color
    out_img = Image.fromarray(np.clip(out, 0, 255).astype(np.uint8), mode="RGB")
    if group_ids is not None:
        draw = ImageDraw.Draw(out_img)
        for p, gid in zip(proposals, group_ids):
            if gid < 0:
                continue
            draw.text((p.box.cx, p.box.cy), str(gid), fill=(255, 255, 255), anchor="mm")
    return np.asarray(out_img)


def render_file(
    image_path: str | Path,
    proposals: list[Proposal],
    out_path: str | Path,
    group_ids: list[int] | None = None,
) -> None:
    """Render overlays to out_path; zero proposals copy the image unmodified."""
    if not proposals:
        warnings.warn(f"no proposals for {image_path}; copying image unmodified")
        shutil.copyfile(image_path, out_path)
        return
    img = np.asarray(Image.open(image_path).convert("RGB"))
    overlay = render_overlay(img, proposals, group_ids)
    Image.fromarray(overlay, mode="RGB").save(out_path)
