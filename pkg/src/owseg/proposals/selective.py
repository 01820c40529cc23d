"""Hierarchical region merging over a graph-based oversegmentation.

Initial regions come from graph_segment; each step merges the most-similar
adjacent pair (weighted color/texture/size/fill terms) until one region
remains. Every initial and merged region becomes a mask proposal. Histograms:
color 25 bins/channel over RGB, texture 8 gradient orientations x 10
magnitude bins per channel. Merged histograms are size-weighted averages.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyInputError
from ..masks import BinaryMask, Box, Proposal, Provenance
from .graph import SegParams, _build_edges, graph_segment

COLOR_BINS = 25
TEXTURE_ORIENTATIONS = 8
TEXTURE_BINS = 10
_MAG_RANGE = 361.0  # max one-sided gradient magnitude for 8-bit channels

DEFAULT_WEIGHTS = (1.0, 1.0, 1.0, 1.0)


@dataclass
class Region:
    id: int
    pixel_count: int
    color_hist: np.ndarray
    texture_hist: np.ndarray
    box: Box
    neighbors: set[int] = field(default_factory=set)


def color_similarity(a: Region, b: Region) -> float:
    """Histogram intersection of normalized color histograms."""
    return float(np.minimum(a.color_hist, b.color_hist).sum())


def texture_similarity(a: Region, b: Region) -> float:
    return float(np.minimum(a.texture_hist, b.texture_hist).sum())


def size_similarity(a: Region, b: Region, image_area: int) -> float:
    """Encourages small regions to merge early."""
    return 1.0 - (a.pixel_count + b.pixel_count) / image_area


def fill_similarity(a: Region, b: Region, image_area: int) -> float:
    """Encourages merges that fill holes in the joint bounding box."""
    ax1, ay1, ax2, ay2 = a.box.to_corners()
    bx1, by1, bx2, by2 = b.box.to_corners()
    bb = (max(ax2, bx2) - min(ax1, bx1)) * (max(ay2, by2) - min(ay1, by1))
    return 1.0 - (bb - a.pixel_count - b.pixel_count) / image_area


def region_similarity(
    a: Region, b: Region, image_area: int, weights: tuple[float, float, float, float]
) -> float:
    wc, wt, ws, wf = weights
    total = wc + wt + ws + wf
    s = (
        wc * color_similarity(a, b)
        + wt * texture_similarity(a, b)
        + ws * size_similarity(a, b, image_area)
        + wf * fill_similarity(a, b, image_area)
    )
    return s / total


def _validate_weights(weights) -> tuple[float, float, float, float]:
    weights = tuple(float(w) for w in weights)
    if len(weights) != 4:
        raise ValueError(f"expected 4 similarity weights, got {len(weights)}")
    if any(not (0.0 <= w <= 1.0) for w in weights):
        raise ValueError(f"similarity weights must lie in [0, 1], got {weights}")
    if sum(weights) == 0:
        raise ValueError("at least one similarity weight must be positive")
    return weights


def _color_histograms(image: np.ndarray, labels: np.ndarray, n: int) -> np.ndarray:
    bins = (image.astype(np.int64) * COLOR_BINS) // 256
    flat_labels = labels.ravel().astype(np.int64)
    hist = np.empty((n, 3 * COLOR_BINS), dtype=np.float64)
    for c in range(3):
        idx = flat_labels * COLOR_BINS + bins[:, :, c].ravel()
        hist[:, c * COLOR_BINS : (c + 1) * COLOR_BINS] = np.bincount(
            idx, minlength=n * COLOR_BINS
        ).reshape(n, COLOR_BINS)
    return hist / hist.sum(axis=1, keepdims=True)


def _texture_histograms(image: np.ndarray, labels: np.ndarray, n: int) -> np.ndarray:
    img = image.astype(np.float64)
    flat_labels = labels.ravel().astype(np.int64)
    per_channel = TEXTURE_ORIENTATIONS * TEXTURE_BINS
    hist = np.empty((n, 3 * per_channel), dtype=np.float64)
    for c in range(3):
        gy, gx = np.gradient(img[:, :, c])
        theta = np.arctan2(gy, gx)
        obin = np.clip(
            ((theta + np.pi) / (2 * np.pi) * TEXTURE_ORIENTATIONS).astype(np.int64),
            0,
            TEXTURE_ORIENTATIONS - 1,
        )
        mag = np.hypot(gy, gx)
        mbin = np.clip((mag / _MAG_RANGE * TEXTURE_BINS).astype(np.int64), 0, TEXTURE_BINS - 1)
        idx = flat_labels * per_channel + (obin * TEXTURE_BINS + mbin).ravel()
        hist[:, c * per_channel : (c + 1) * per_channel] = np.bincount(
            idx, minlength=n * per_channel
        ).reshape(n, per_channel)
    return hist / hist.sum(axis=1, keepdims=True)


def _region_boxes(labels: np.ndarray, n: int) -> list[tuple[int, int, int, int]]:
    h, w = labels.shape
    rows = np.repeat(np.arange(h), w)
    cols = np.tile(np.arange(w), h)
    flat = labels.ravel()
    r0 = np.full(n, h, dtype=np.int64)
    r1 = np.full(n, -1, dtype=np.int64)
    c0 = np.full(n, w, dtype=np.int64)
    c1 = np.full(n, -1, dtype=np.int64)
    np.minimum.at(r0, flat, rows)
    np.maximum.at(r1, flat, rows)
    np.minimum.at(c0, flat, cols)
    np.maximum.at(c1, flat, cols)
    return [(int(c0[i]), int(r0[i]), int(c1[i]) + 1, int(r1[i]) + 1) for i in range(n)]


def _adjacency(labels: np.ndarray, n: int) -> list[set[int]]:
    ea, eb = _build_edges(*labels.shape)
    flat = labels.ravel().astype(np.int64)
    la, lb = flat[ea], flat[eb]
    mask = la != lb
    lo = np.minimum(la[mask], lb[mask])
    hi = np.maximum(la[mask], lb[mask])
    pairs = np.unique(lo * n + hi)
    neighbors: list[set[int]] = [set() for _ in range(n)]
    for key in pairs.tolist():
        i, j = divmod(key, n)
        neighbors[i].add(j)
        neighbors[j].add(i)
    return neighbors


def _initial_regions(image: np.ndarray, labels: np.ndarray) -> list[Region]:
    n = int(labels.max()) + 1
    counts = np.bincount(labels.ravel(), minlength=n)
    color = _color_histograms(image, labels, n)
    texture = _texture_histograms(image, labels, n)
    boxes = _region_boxes(labels, n)
    neigh = _adjacency(labels, n)
    return [
        Region(
            id=i,
            pixel_count=int(counts[i]),
            color_hist=color[i],
            texture_hist=texture[i],
            box=Box.from_corners(*boxes[i]),
            neighbors=neigh[i],
        )
        for i in range(n)
    ]


def _merge_regions(a: Region, b: Region, new_id: int) -> Region:
    total = a.pixel_count + b.pixel_count
    color = (a.pixel_count * a.color_hist + b.pixel_count * b.color_hist) / total
    texture = (a.pixel_count * a.texture_hist + b.pixel_count * b.texture_hist) / total
    ax1, ay1, ax2, ay2 = a.box.to_corners()
    bx1, by1, bx2, by2 = b.box.to_corners()
    box = Box.from_corners(min(ax1, bx1), min(ay1, by1), max(ax2, bx2), max(ay2, by2))
    neighbors = (a.neighbors | b.neighbors) - {a.id, b.id}
    return Region(new_id, total, color, texture, box, neighbors)


def selective_search_regions(
    image: np.ndarray,
    params: SegParams = SegParams(),
    weights: tuple[float, float, float, float] = DEFAULT_WEIGHTS,
) -> tuple[list[tuple[int, list[int]]], np.ndarray]:
    """Run the full hierarchy.

    Returns ([(region_id, member_initial_labels)...] for all 2n-1 regions in
    creation order, label_map). Exposed so callers can inspect the merge tree.
    """
    weights = _validate_weights(weights)
    labels = graph_segment(image, params)
    regions = {r.id: r for r in _initial_regions(image, labels)}
    members: dict[int, list[int]] = {i: [i] for i in regions}
    created: list[tuple[int, list[int]]] = [(i, members[i]) for i in sorted(regions)]
    image_area = labels.size
    next_id = len(regions)

    sims: dict[tuple[int, int], float] = {}
    for r in regions.values():
        for nb in r.neighbors:
            if r.id < nb:
                sims[(r.id, nb)] = region_similarity(r, regions[nb], image_area, weights)

    while len(regions) > 1:
        best_pair = None
        best_sim = -np.inf
        for pair, s in sims.items():
            if s > best_sim or (s == best_sim and pair < best_pair):
                best_sim = s
                best_pair = pair
        i, j = best_pair
        merged = _merge_regions(regions[i], regions[j], next_id)
        members[next_id] = members[i] + members[j]
        created.append((next_id, members[next_id]))

        for k in (i, j):
            for nb in regions[k].neighbors:
                sims.pop((min(k, nb), max(k, nb)), None)
        del regions[i], regions[j]
        for nb in merged.neighbors:
            r = regions[nb]
            r.neighbors.discard(i)
            r.neighbors.discard(j)
            r.neighbors.add(next_id)
            sims[(min(nb, next_id), max(nb, next_id))] = region_similarity(
                merged, r, image_area, weights
            )
        regions[next_id] = merged
        next_id += 1

    return created, labels


def selective_search(
    image: np.ndarray,
    params: SegParams = SegParams(),
    weights: tuple[float, float, float, float] = DEFAULT_WEIGHTS,
) -> list[Proposal]:
    """All hierarchy regions as mask proposals, deduplicated by exact box."""
    created, labels = selective_search_regions(image, params, weights)
    return _emit_proposals(created, labels)


def selective_search_with_levels(
    image: np.ndarray,
    params: SegParams = SegParams(),
    weights: tuple[float, float, float, float] = DEFAULT_WEIGHTS,
) -> tuple[list[Proposal], list[int]]:
    """Like selective_search but also reports each proposal's hierarchy level
    (0 = initial oversegmentation leaf, 1 = merged region)."""
    created, labels = selective_search_regions(image, params, weights)
    n_leaves = int(labels.max()) + 1
    proposals = []
    levels = []
    seen: set[tuple[float, float, float, float]] = set()
    for rid, member_labels in created:
        if len(member_labels) == 1:
            mask = labels == member_labels[0]
        else:
            mask = np.isin(labels, member_labels)
        p = Proposal.from_mask(BinaryMask(mask), provenance=Provenance.UNSUPERVISED)
        key = p.box.to_corners()
        if key in seen:
            continue
        seen.add(key)
        proposals.append(p)
        levels.append(0 if rid < n_leaves else 1)
    return proposals, levels


def selective_search_multi(
    image: np.ndarray,
    params_list: list[SegParams],
    weights: tuple[float, float, float, float] = DEFAULT_WEIGHTS,
) -> list[Proposal]:
    """Concatenate hierarchies from several parameter combinations, dedup by box."""
    if not params_list:
        raise EmptyInputError("params_list must contain at least one SegParams")
    proposals: list[Proposal] = []
    for params in params_list:
        proposals.extend(selective_search(image, params, weights))
    return _dedup_by_box(proposals)


def _emit_proposals(created, labels) -> list[Proposal]:
    proposals = []
    for _, member_labels in created:
        if len(member_labels) == 1:
            mask = labels == member_labels[0]
        else:
            mask = np.isin(labels, member_labels)
        proposals.append(Proposal.from_mask(BinaryMask(mask), provenance=Provenance.UNSUPERVISED))
    return _dedup_by_box(proposals)


def _dedup_by_box(proposals: list[Proposal]) -> list[Proposal]:
    seen: set[tuple[float, float, float, float]] = set()
    out = []
    for p in proposals:
        key = p.box.to_corners()
        if key not in seen:
            seen.add(key)
            out.append(p)
    return out
