"""Synthetic scene generator for desk-scale open-world experiments.

Scenes contain clusters of touching flat-shaded shapes on a gray background;
rectangles play the "seen" (annotated) category, ellipses and triangles the
"unseen" ones. Every shape is painted in two lightness bands of a single hue,
so bottom-up segmentation over-segments each object into hue-coherent parts.
Shapes inside a cluster touch (contact, not occlusion), which makes the
bottom-up hierarchy's geometric merge cues unreliable at object borders while
hue-based affinity grouping still reassembles whole objects. Hue slots are
globally separated so affinities across objects stay below threshold.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .masks import BinaryMask, encode_segmentation

SEEN_KINDS = ("rect",)
UNSEEN_KINDS = ("ellipse", "triangle")
ALL_KINDS = SEEN_KINDS + UNSEEN_KINDS

BACKGROUND_RGB = (118, 118, 118)
_SATURATION = 0.85
_BAND_LIGHTNESS = (0.36, 0.56)


@dataclass(frozen=True)
class ShapeInstance:
    kind: str
    mask: BinaryMask
    hue: float


def _rect_mask(h, w, cy, cx, size, rng):
    sh = size * rng.uniform(0.6, 1.1)
    sw = size * rng.uniform(0.6, 1.1)
    yy, xx = np.mgrid[0:h, 0:w]
    return (np.abs(yy + 0.5 - cy) <= sh / 2) & (np.abs(xx + 0.5 - cx) <= sw / 2)


def _ellipse_mask(h, w, cy, cx, size, rng):
    ry = size * rng.uniform(0.32, 0.45)
    rx = size * rng.uniform(0.5, 0.75)
    th = rng.uniform(0, np.pi)
    yy, xx = np.mgrid[0:h, 0:w]
    dy = yy + 0.5 - cy
    dx = xx + 0.5 - cx
    u = dx * np.cos(th) + dy * np.sin(th)
    v = -dx * np.sin(th) + dy * np.cos(th)
    return (u / rx) ** 2 + (v / ry) ** 2 <= 1.0


def _triangle_mask(h, w, cy, cx, size, rng):
    r = size * rng.uniform(0.6, 0.8)
    angles = [rng.uniform(k * 2 * np.pi / 3, (k + 1) * 2 * np.pi / 3) for k in range(3)]
    pts = [(cx + r * np.cos(a), cy + r * np.sin(a)) for a in angles]
    yy, xx = np.mgrid[0:h, 0:w]
    px, py = xx + 0.5, yy + 0.5

    def edge(a, b):
        return (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])

    e0, e1, e2 = edge(pts[0], pts[1]), edge(pts[1], pts[2]), edge(pts[2], pts[0])
    return ((e0 >= 0) & (e1 >= 0) & (e2 >= 0)) | ((e0 <= 0) & (e1 <= 0) & (e2 <= 0))


_SHAPE_FNS = {"rect": _rect_mask, "ellipse": _ellipse_mask, "triangle": _triangle_mask}


def _hue_rgb(hue: float, lightness: float) -> np.ndarray:
    r, g, b = colorsys.hls_to_rgb(hue % 1.0, lightness, _SATURATION)
    return np.array([round(r * 255), round(g * 255), round(b * 255)], dtype=np.uint8)


def _paint_bands(img, mask, hue, rng):
    """Fill the mask with two parallel lightness bands of one hue."""
    rr, cc = np.nonzero(mask)
    theta = rng.uniform(0, np.pi)
    proj = (cc + 0.5) * np.cos(theta) + (rr + 0.5) * np.sin(theta)
    cut = np.quantile(proj, rng.uniform(0.38, 0.62))
    dark = proj <= cut
    lo, hi = _BAND_LIGHTNESS if rng.random() < 0.5 else _BAND_LIGHTNESS[::-1]
    img[rr[dark], cc[dark]] = _hue_rgb(hue, lo)
    img[rr[~dark], cc[~dark]] = _hue_rgb(hue, hi)


def generate_scene(
    rng: np.random.Generator,
    height: int = 160,
    width: int = 160,
    min_shapes: int = 3,
    max_shapes: int = 4,
    max_cover: float = 0.02,
    min_visibility: float = 0.85,
) -> tuple[np.ndarray, list[ShapeInstance]]:
    """One scene of touching-cluster two-tone shapes; returns (image, instances)."""
    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:] = BACKGROUND_RGB
    n = int(rng.integers(min_shapes, max_shapes + 1))
    base_size = min(height, width) / 4.2
    hue0 = rng.uniform(0, 1)
    slots = [(hue0 + i / n) % 1.0 for i in rng.permutation(n)]

    placed: list[np.ndarray] = []
    visible: list[np.ndarray] = []
    kinds: list[str] = []
    hues: list[float] = []
    cluster_sizes: list[int] = []
    remaining = n
    while remaining > 0:
        c = int(min(remaining, rng.integers(2, 4)))
        cluster_sizes.append(c)
        remaining -= c

    slot_i = 0
    for csize in cluster_sizes:
        anchor = None
        for _ in range(csize):
            kind = ALL_KINDS[int(rng.integers(0, len(ALL_KINDS)))]
            size = base_size * rng.uniform(0.8, 1.2)
            accepted = None
            for _ in range(40):
                if anchor is None:
                    cy = rng.uniform(size, height - size)
                    cx = rng.uniform(size, width - size)
                else:
                    ang = rng.uniform(0, 2 * np.pi)
                    dist = rng.uniform(size * 0.85, size * 1.05)
                    cy = anchor[0] + dist * np.sin(ang)
                    cx = anchor[1] + dist * np.cos(ang)
                    if not (size / 2 < cy < height - size / 2 and size / 2 < cx < width - size / 2):
                        continue
                mask = _SHAPE_FNS[kind](height, width, cy, cx, size, rng)
                area = mask.sum()
                if area < 150:
                    continue
                occupied = np.zeros((height, width), dtype=bool)
                for m in placed:
                    occupied |= m
                if (mask & occupied).sum() > max_cover * area:
                    continue
                if anchor is not None and not (mask & occupied).any():
                    # require contact (or a slight bite) inside a cluster
                    dil = np.zeros_like(mask)
                    dil[1:, :] |= mask[:-1, :]
                    dil[:-1, :] |= mask[1:, :]
                    dil[:, 1:] |= mask[:, :-1]
                    dil[:, :-1] |= mask[:, 1:]
                    if not (dil & occupied).any():
                        continue
                ok = True
                for k, vm in enumerate(visible):
                    if (vm & ~mask).sum() < max(120, min_visibility * placed[k].sum()):
                        ok = False
                        break
                if not ok:
                    continue
                accepted = mask
                break
            if accepted is None:
                continue
            rr, cc = np.nonzero(accepted)
            hue = slots[slot_i % n]
            slot_i += 1
            _paint_bands(img, accepted, hue, rng)
            for k in range(len(visible)):
                visible[k] = visible[k] & ~accepted
            placed.append(accepted)
            visible.append(accepted.copy())
            kinds.append(kind)
            hues.append(hue)
            anchor = (float(rr.mean()), float(cc.mean()))

    shapes = [
        ShapeInstance(kind=k, mask=BinaryMask(v), hue=hh)
        for k, v, hh in zip(kinds, visible, hues)
        if v.sum() >= 120
    ]
    return img, shapes


def _annotation(ann_id: int, image_id: int, shape: ShapeInstance) -> dict:
    tb = shape.mask.tight_box()
    x, y, w, h = tb.to_xywh()
    return {
        "id": ann_id,
        "image_id": image_id,
        "category_id": 1,
        "bbox": [x, y, w, h],
        "area": shape.mask.area,
        "segmentation": encode_segmentation(shape.mask),
        "iscrowd": 0,
        "ignore": 0,
        "shape": shape.kind,
    }


def generate_dataset(
    out_dir: str | Path,
    num_images: int = 20,
    seed: int = 0,
    height: int = 160,
    width: int = 160,
    min_shapes: int = 3,
    max_shapes: int = 4,
) -> dict:
    """Write scene images plus gt_all/gt_seen/gt_unseen COCO-style files.

    Returns {"images_dir": ..., "gt_all": ..., "gt_seen": ..., "gt_unseen": ...}.
    """
    from .schemas import gt_to_json, write_json

    out = Path(out_dir)
    images_dir = out / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    image_recs = []
    anns: dict[str, list] = {"all": [], "seen": [], "unseen": []}
    ann_id = 1
    for image_id in range(num_images):
        img, shapes = generate_scene(rng, height, width, min_shapes, max_shapes)
        name = f"img_{image_id:04d}.png"
        Image.fromarray(img, mode="RGB").save(images_dir / name)
        image_recs.append({"id": image_id, "file_name": name, "height": height, "width": width})
        for s in shapes:
            ann = _annotation(ann_id, image_id, s)
            ann_id += 1
            anns["all"].append(ann)
            anns["seen" if s.kind in SEEN_KINDS else "unseen"].append(ann)

    paths = {"images_dir": str(images_dir)}
    for split in ("all", "seen", "unseen"):
        path = out / f"gt_{split}.json"
        write_json(path, gt_to_json(image_recs, anns[split]))
        paths[f"gt_{split}"] = str(path)
    return paths
