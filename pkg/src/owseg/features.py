"""Feature pyramids with two providers (handcrafted, file-loaded) and
RoIAlign pooling into fixed-size vectors.

The handcrafted provider is a deterministic stand-in for a learned backbone:
smoothed Lab color (chroma channels signed around neutral so cosine affinity
separates hues), gradient-orientation energy, and normalized x/y position
channels, average-pooled to each stride.

Pyramid file layout (little-endian): magic "OWFP", u32 version, u32 level
count, u32 image height, u32 image width, then per level u32 stride/C/H/W,
then raw float32 row-major channel-first tensors in level order.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import (
    DegenerateBoxError,
    EmptyInputError,
    PyramidFormatError,
    PyramidShapeError,
)
from .masks import Box

_MAGIC = b"OWFP"
_VERSION = 1


@dataclass(frozen=True)
class FeatureConfig:
    strides: tuple[int, ...] = (4, 8, 16, 32)
    smooth_sigma: float = 1.0
    orientation_bins: int = 4
    weight_lightness: float = 0.5
    weight_chroma: float = 2.0
    weight_texture: float = 0.75

    def __post_init__(self):
        if not self.strides or any(s < 1 for s in self.strides):
            raise ValueError(f"strides must be positive, got {self.strides}")
        if list(self.strides) != sorted(set(self.strides)):
            raise ValueError(f"strides must be strictly increasing, got {self.strides}")
        if self.orientation_bins < 1:
            raise ValueError("orientation_bins must be >= 1")


@dataclass(frozen=True)
class PyramidLevel:
    stride: int
    data: np.ndarray  # (C, H, W) float32, read-only

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float32))
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if arr.ndim != 3:
            raise PyramidShapeError(f"level tensor must be (C, H, W), got shape {arr.shape}")


@dataclass(frozen=True)
class FeaturePyramid:
    levels: tuple[PyramidLevel, ...]
    image_height: int
    image_width: int

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise PyramidShapeError("pyramid needs at least one level")
        strides = [lvl.stride for lvl in self.levels]
        if strides != sorted(set(strides)):
            raise PyramidShapeError(f"level strides must be strictly increasing, got {strides}")
        channels = {lvl.data.shape[0] for lvl in self.levels}
        if len(channels) != 1:
            raise PyramidShapeError(f"channel count differs across levels: {sorted(channels)}")
        for lvl in self.levels:
            _, h, w = lvl.data.shape
            eh = math.ceil(self.image_height / lvl.stride)
            ew = math.ceil(self.image_width / lvl.stride)
            if abs(h - eh) > 1 or abs(w - ew) > 1:
                raise PyramidShapeError(
                    f"level stride {lvl.stride} has map {h}x{w}, expected about {eh}x{ew} "
                    f"for image {self.image_height}x{self.image_width}"
                )

    @property
    def channels(self) -> int:
        return self.levels[0].data.shape[0]


# ---------------------------------------------------------------------------
# Handcrafted provider
# ---------------------------------------------------------------------------

def rgb_to_lab(image: np.ndarray) -> np.ndarray:
    """sRGB (uint8 or [0,1] float) to CIE Lab under D65, shape (h, w, 3)."""
    rgb = np.asarray(image, dtype=np.float64)
    if rgb.max() > 1.0:
        rgb = rgb / 255.0
    lin = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    m = np.array(
        [
            [0.4124564, 0.3575761, 0.1804375],
            [0.2126729, 0.7151522, 0.0721750],
            [0.0193339, 0.1191920, 0.9503041],
        ]
    )
    xyz = lin @ m.T
    xyz /= np.array([0.95047, 1.0, 1.08883])
    eps = (6 / 29) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3 * (6 / 29) ** 2) + 4 / 29)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116 * f[..., 1] - 16
    lab[..., 1] = 500 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200 * (f[..., 1] - f[..., 2])
    return lab


def _avg_pool(channel: np.ndarray, stride: int) -> np.ndarray:
    if stride == 1:
        return channel
    h, w = channel.shape
    ph = (-h) % stride
    pw = (-w) % stride
    if ph or pw:
        channel = np.pad(channel, ((0, ph), (0, pw)), mode="edge")
    hh, ww = channel.shape
    return channel.reshape(hh // stride, stride, ww // stride, stride).mean(axis=(1, 3))


def handcrafted_pyramid(image: np.ndarray, cfg: FeatureConfig = FeatureConfig()) -> FeaturePyramid:
    """Deterministic per-pixel features downsampled to the configured strides."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] == 0 or img.shape[1] == 0:
        raise EmptyInputError(f"expected nonempty (h, w, 3) image, got shape {img.shape}")
    h, w = img.shape[:2]
    lab = rgb_to_lab(img)
    lum = lab[..., 0] / 100.0
    ca = lab[..., 1] / 110.0
    cb = lab[..., 2] / 110.0
    if cfg.smooth_sigma > 0:
        lum = gaussian_filter(lum, cfg.smooth_sigma, mode="nearest")
        ca = gaussian_filter(ca, cfg.smooth_sigma, mode="nearest")
        cb = gaussian_filter(cb, cfg.smooth_sigma, mode="nearest")

    gy, gx = np.gradient(lum)
    mag = np.hypot(gy, gx)
    theta = np.mod(np.arctan2(gy, gx), np.pi)  # axial orientation
    k = cfg.orientation_bins
    obin = np.clip((theta / np.pi * k).astype(np.int64), 0, k - 1)
    energy = []
    for i in range(k):
        e = np.where(obin == i, mag, 0.0)
        if cfg.smooth_sigma > 0:
            e = gaussian_filter(e, 2 * cfg.smooth_sigma, mode="nearest")
        energy.append(e * cfg.weight_texture)

    pos_x = np.broadcast_to((np.arange(w) + 0.5) / w, (h, w))
    pos_y = np.broadcast_to(((np.arange(h) + 0.5) / h)[:, None], (h, w))

    channels = [
        lum * cfg.weight_lightness,
        ca * cfg.weight_chroma,
        cb * cfg.weight_chroma,
        *energy,
        pos_x,
        pos_y,
    ]
    base = np.stack(channels)
    levels = []
    for stride in cfg.strides:
        maps = np.stack([_avg_pool(c, stride) for c in base])
        levels.append(PyramidLevel(stride, maps))
    return FeaturePyramid(tuple(levels), h, w)


# ---------------------------------------------------------------------------
# File codec
# ---------------------------------------------------------------------------

def save_pyramid(pyr: FeaturePyramid, path: str | Path) -> None:
    parts = [struct.pack("<4sIIII", _MAGIC, _VERSION, len(pyr.levels), pyr.image_height, pyr.image_width)]
    for lvl in pyr.levels:
        c, h, w = lvl.data.shape
        parts.append(struct.pack("<IIII", lvl.stride, c, h, w))
    for lvl in pyr.levels:
        parts.append(np.ascontiguousarray(lvl.data, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_pyramid(path: str | Path) -> FeaturePyramid:
    raw = Path(path).read_bytes()
    head = struct.calcsize("<4sIIII")
    if len(raw) < head:
        raise PyramidFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, n_levels, image_h, image_w = struct.unpack_from("<4sIIII", raw, 0)
    if magic != _MAGIC:
        raise PyramidFormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise PyramidFormatError(f"{path}: unsupported version {version}")
    if n_levels == 0:
        raise PyramidFormatError(f"{path}: zero levels")
    off = head
    lsize = struct.calcsize("<IIII")
    shapes = []
    for _ in range(n_levels):
        if off + lsize > len(raw):
            raise PyramidFormatError(f"{path}: truncated level table")
        stride, c, h, w = struct.unpack_from("<IIII", raw, off)
        off += lsize
        shapes.append((stride, c, h, w))
    expected = off + sum(4 * c * h * w for _, c, h, w in shapes)
    if len(raw) < expected:
        raise PyramidFormatError(f"{path}: truncated payload ({len(raw)} < {expected} bytes)")
    if len(raw) > expected:
        raise PyramidFormatError(f"{path}: trailing bytes ({len(raw)} > {expected})")
    levels = []
    for stride, c, h, w in shapes:
        count = c * h * w
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=off).reshape(c, h, w)
        off += 4 * count
        levels.append(PyramidLevel(stride, arr))
    return FeaturePyramid(tuple(levels), image_h, image_w)


# ---------------------------------------------------------------------------
# RoIAlign
# ---------------------------------------------------------------------------

def bilinear_sample(map2d: np.ndarray, y: float, x: float) -> float:
    """Bilinear interpolation at feature coords (y, x); borders clamp."""
    out = _bilinear_grid(np.asarray(map2d, dtype=np.float64)[None], np.array([y]), np.array([x]))
    return float(out[0, 0, 0])


def _bilinear_grid(data: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample (C,H,W) data at the outer grid ys x xs -> (C, len(ys), len(xs))."""
    _, h, w = data.shape
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, max(h - 2, 0))
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, max(w - 2, 0))
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[None, :, None]
    wx = (xs - x0)[None, None, :]
    v00 = data[:, y0[:, None], x0[None, :]]
    v01 = data[:, y0[:, None], x1[None, :]]
    v10 = data[:, y1[:, None], x0[None, :]]
    v11 = data[:, y1[:, None], x1[None, :]]
    top = v00 * (1 - wx) + v01 * wx
    bot = v10 * (1 - wx) + v11 * wx
    return top * (1 - wy) + bot * wy


def select_level(pyr: FeaturePyramid, box: Box) -> int:
    """Canonical feature-pyramid level heuristic: boxes around 224px map to
    stride 16; each halving of scale steps one level down."""
    scale = math.sqrt(box.w * box.h)
    target = 4 + math.floor(math.log2(max(scale, 1e-6) / 224.0))
    best = 0
    best_d = None
    for i, lvl in enumerate(pyr.levels):
        d = abs(math.log2(lvl.stride) - target)
        if best_d is None or d < best_d:
            best, best_d = i, d
    return best


def roi_align(
    pyr: FeaturePyramid, box: Box, grid: int = 7, samples_per_bin: int = 2
) -> np.ndarray:
    """Pool a box into a C*grid*grid vector by bin-averaged bilinear samples.

    The box must already be clipped to the image extent. Image coordinate x
    maps to feature coordinate x/stride - 0.5 (feature pixel centers at
    half-stride offsets).
    """
    if grid < 1 or samples_per_bin < 1:
        raise ValueError("grid and samples_per_bin must be >= 1")
    if box.w <= 0 or box.h <= 0:
        raise DegenerateBoxError(f"roi_align needs positive box area, got {box}")
    x1, y1, x2, y2 = box.to_corners()
    if not (
        0 <= x1 and x2 <= pyr.image_width and 0 <= y1 and y2 <= pyr.image_height
    ):
        raise DegenerateBoxError(
            f"box {box} not clipped to image {pyr.image_height}x{pyr.image_width}"
        )
    lvl = pyr.levels[select_level(pyr, box)]
    g, s = grid, samples_per_bin
    offs = (np.arange(s) + 0.5) / s
    sx = x1 + (np.arange(g)[:, None] + offs[None, :]).reshape(-1) * ((x2 - x1) / g)
    sy = y1 + (np.arange(g)[:, None] + offs[None, :]).reshape(-1) * ((y2 - y1) / g)
    fy = sy / lvl.stride - 0.5
    fx = sx / lvl.stride - 0.5
    sampled = _bilinear_grid(lvl.data.astype(np.float64), fy, fx)
    c = sampled.shape[0]
    pooled = sampled.reshape(c, g, s, g, s).mean(axis=(2, 4))
    return pooled.reshape(-1)
