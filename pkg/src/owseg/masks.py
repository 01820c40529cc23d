"""Core mask/box types, IoU arithmetic, unions, and COCO-compatible RLE codecs.

Conventions:
  - Boxes are stored center-form (cx, cy, w, h); converters provide corner
    form (x1, y1, x2, y2) and COCO xywh form. Rasterization uses half-open
    integer ranges [x1, x2) so pixel areas are exact.
  - RLE is column-major with a leading background count (possibly 0), the
    COCO layout. The compressed variant packs counts into 5-bit groups with
    a sixth continuation bit, chars offset by 48, counts delta-encoded
    against the value two runs back starting at the fourth run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateBoxError,
    EmptyInputError,
    RleCodecError,
    ScoreRangeError,
    ShapeMismatchError,
)


class Provenance(str, Enum):
    PART = "part"
    GROUPED = "grouped"
    GROUND_TRUTH = "ground_truth"
    UNSUPERVISED = "unsupervised"


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in center form. w and h must be positive."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise DegenerateBoxError(f"box must have positive extent, got w={self.w}, h={self.h}")

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> "Box":
        w = x2 - x1
        h = y2 - y1
        return cls(x1 + w / 2, y1 + h / 2, w, h)

    def to_corners(self) -> tuple[float, float, float, float]:
        hw = self.w / 2
        hh = self.h / 2
        return (self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh)

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "Box":
        return cls.from_corners(x, y, x + w, y + h)

    def to_xywh(self) -> tuple[float, float, float, float]:
        x1, y1, _, _ = self.to_corners()
        return (x1, y1, self.w, self.h)

    @property
    def area(self) -> float:
        return self.w * self.h

    def clip(self, height: int, width: int) -> "Box":
        """Clamp the box to the image extent [0,width] x [0,height]."""
        x1, y1, x2, y2 = self.to_corners()
        x1 = min(max(x1, 0.0), float(width))
        x2 = min(max(x2, 0.0), float(width))
        y1 = min(max(y1, 0.0), float(height))
        y2 = min(max(y2, 0.0), float(height))
        if x2 - x1 <= 0 or y2 - y1 <= 0:
            raise DegenerateBoxError(
                f"box {self} degenerates to zero area when clipped to {height}x{width}"
            )
        return Box.from_corners(x1, y1, x2, y2)


def box_iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two boxes; 0 for disjoint or touching boxes."""
    ax1, ay1, ax2, ay2 = a.to_corners()
    bx1, by1, bx2, by2 = b.to_corners()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


class BinaryMask:
    """Immutable 2D boolean raster."""

    __slots__ = ("_data",)

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data)
        if arr.ndim != 2:
            raise ShapeMismatchError(f"mask must be 2D, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr.astype(bool, copy=False))
        arr.setflags(write=False)
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def width(self) -> int:
        return self._data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    @property
    def area(self) -> int:
        return int(self._data.sum())

    @property
    def is_empty(self) -> bool:
        return not self._data.any()

    def tight_box(self) -> Box | None:
        """Smallest box containing every foreground pixel; None when empty."""
        rows = np.flatnonzero(self._data.any(axis=1))
        if rows.size == 0:
            return None
        cols = np.flatnonzero(self._data.any(axis=0))
        return Box.from_corners(float(cols[0]), float(rows[0]), float(cols[-1] + 1), float(rows[-1] + 1))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._data, other._data))

    def __hash__(self):
        return hash((self.shape, self._data.tobytes()))

    def __repr__(self):
        return f"BinaryMask({self.height}x{self.width}, area={self.area})"


def _require_same_shape(a: BinaryMask, b: BinaryMask, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{op}: incompatible rasters {a.shape} vs {b.shape}")


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Pixel IoU of two masks of equal size; 0 when the union is empty."""
    _require_same_shape(a, b, "mask_iou")
    inter = int(np.count_nonzero(a.data & b.data))
    union = int(np.count_nonzero(a.data | b.data))
    if union == 0:
        return 0.0
    return inter / union


def mask_union(masks: Sequence[BinaryMask]) -> BinaryMask:
    """Pixelwise OR of a nonempty sequence of same-size masks."""
    if len(masks) == 0:
        raise EmptyInputError("mask_union of an empty sequence")
    first = masks[0]
    out = first.data.copy()
    for m in masks[1:]:
        _require_same_shape(first, m, "mask_union")
        out |= m.data
    return BinaryMask(out)


# ---------------------------------------------------------------------------
# RLE codecs
# ---------------------------------------------------------------------------

def rle_encode(mask: BinaryMask) -> list[int]:
    """Column-major run lengths; the first count covers background (may be 0)."""
    flat = mask.data.ravel(order="F")
    n = flat.size
    if n == 0:
        return []
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [n]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return counts


def rle_decode(height: int, width: int, counts: Sequence[int]) -> BinaryMask:
    """Inverse of rle_encode; rejects counts that do not sum to height*width."""
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise RleCodecError(f"negative run length in counts: {counts}")
    total = sum(counts)
    if total != height * width:
        raise RleCodecError(f"counts sum {total} != {height}x{width} = {height * width}")
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return BinaryMask(flat.reshape((height, width), order="F"))


def rle_to_string(counts: Sequence[int]) -> str:
    """Pack counts into the COCO compressed-counts character string."""
    counts = [int(c) for c in counts]
    out: list[str] = []
    for i, c in enumerate(counts):
        x = c
        if i > 2:
            x -= counts[i - 2]
        more = True
        while more:
            ch = x & 0x1F
            x >>= 5
            more = (x != -1) if (ch & 0x10) else (x != 0)
            if more:
                ch |= 0x20
            out.append(chr(ch + 48))
    return "".join(out)


def rle_from_string(s: str) -> list[int]:
    """Unpack a COCO compressed-counts string back into run lengths."""
    counts: list[int] = []
    p = 0
    n = len(s)
    while p < n:
        x = 0
        k = 0
        more = True
        while more:
            if p >= n:
                raise RleCodecError("truncated compressed RLE string")
            c = ord(s[p]) - 48
            if c < 0 or c > 63:
                raise RleCodecError(f"invalid character {s[p]!r} in compressed RLE string")
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            p += 1
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(counts) > 2:
            x += counts[-2]
        counts.append(x)
    return counts


def encode_segmentation(mask: BinaryMask, compressed: bool = False) -> dict:
    """COCO segmentation payload: {"size": [h, w], "counts": list|str}."""
    counts = rle_encode(mask)
    return {
        "size": [mask.height, mask.width],
        "counts": rle_to_string(counts) if compressed else counts,
    }


def decode_segmentation(payload: dict) -> BinaryMask:
    """Decode either the uncompressed or compressed COCO RLE payload."""
    try:
        h, w = payload["size"]
        counts = payload["counts"]
    except (KeyError, TypeError, ValueError) as exc:
        raise RleCodecError(f"malformed segmentation payload: {payload!r}") from exc
    if isinstance(counts, str):
        counts = rle_from_string(counts)
    return rle_decode(int(h), int(w), counts)


# ---------------------------------------------------------------------------
# Proposals and label sets
# ---------------------------------------------------------------------------

_BOX_SLACK_PX = 1.0  # rasterization slack allowed between mask tight box and box


@dataclass(frozen=True)
class Proposal:
    """One detection candidate: box, mask, score components and provenance."""

    box: Box
    mask: BinaryMask
    score_c: float = 1.0
    score_b: float = 1.0
    score_m: float = 1.0
    provenance: Provenance = Provenance.UNSUPERVISED

    def __post_init__(self):
        for name in ("score_c", "score_b", "score_m"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ScoreRangeError(f"{name}={v} outside [0, 1]")
        tb = self.mask.tight_box()
        if tb is not None:
            tx1, ty1, tx2, ty2 = tb.to_corners()
            bx1, by1, bx2, by2 = self.box.to_corners()
            s = _BOX_SLACK_PX
            if tx1 < bx1 - s or ty1 < by1 - s or tx2 > bx2 + s or ty2 > by2 + s:
                raise ShapeMismatchError(
                    f"mask tight box {tb} escapes proposal box {self.box} by more than {s}px"
                )

    @classmethod
    def from_mask(
        cls,
        mask: BinaryMask,
        score_c: float = 1.0,
        score_b: float = 1.0,
        score_m: float = 1.0,
        provenance: Provenance = Provenance.UNSUPERVISED,
    ) -> "Proposal":
        tb = mask.tight_box()
        if tb is None:
            raise EmptyInputError("cannot build a proposal from an empty mask")
        return cls(tb, mask, score_c, score_b, score_m, provenance)


_LABEL_PROVENANCES = (Provenance.GROUND_TRUTH, Provenance.UNSUPERVISED)


@dataclass(frozen=True)
class LabelSet:
    """Training-label container restricted to ground-truth/unsupervised entries."""

    entries: tuple[Proposal, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        for i, p in enumerate(self.entries):
            if p.provenance not in _LABEL_PROVENANCES:
                raise ValueError(
                    f"label set entry {i} has provenance {p.provenance}, "
                    f"expected ground_truth or unsupervised"
                )

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


# ---------------------------------------------------------------------------
# Batched IoU with exact prefilters (used by ranking/evaluation)
# ---------------------------------------------------------------------------

def mask_iou_pairs(
    query: BinaryMask,
    query_box: Box,
    others: Sequence[BinaryMask],
    other_boxes: Sequence[Box],
    lower_bound: float = 0.0,
) -> np.ndarray:
    """IoU of one mask against many, skipping pairs provably below lower_bound.

    Uses two exact bounds: IoU <= min(area)/max(area) and IoU <= box
    intersection area / max(area). Skipped pairs report IoU 0.0, which is
    only safe when the caller merely thresholds at >= lower_bound.
    """
    qa = query.area
    out = np.zeros(len(others), dtype=np.float64)
    if qa == 0:
        return out
    qx1, qy1, qx2, qy2 = query_box.to_corners()
    for i, (m, b) in enumerate(zip(others, other_boxes)):
        oa = m.area
        if oa == 0:
            continue
        lo, hi = (qa, oa) if qa <= oa else (oa, qa)
        if lower_bound > 0.0 and lo / hi < lower_bound:
            continue
        bx1, by1, bx2, by2 = b.to_corners()
        iw = min(qx2, bx2) - max(qx1, bx1)
        ih = min(qy2, by2) - max(qy1, by1)
        if iw <= 0 or ih <= 0:
            continue
        if lower_bound > 0.0 and (iw * ih) / hi < lower_bound:
            continue
        out[i] = mask_iou(query, m)
    return out
