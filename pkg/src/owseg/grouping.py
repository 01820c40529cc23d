"""Part grouping: box expansion for context, cosine affinities over pooled
features, greedy average-linkage agglomeration on threshold-shifted
affinities, and mask merging into whole-object proposals.

Clustering merges the cluster pair with maximal average (affinity - tau)
while that maximum stays positive; ties resolve to the lexicographically
smallest pair of cluster representatives (each cluster is represented by its
smallest member index). This greedily maximizes total intra-partition
shifted affinity.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AffinityMatrixError, EmptyInputError, ZeroNormFeatureError
from .features import FeaturePyramid, roi_align
from .masks import Box, Proposal, Provenance, mask_union


@dataclass(frozen=True)
class GroupingConfig:
    delta: float = 0.1
    tau: float = 0.5
    keep_originals: bool = True
    grid: int = 7
    samples_per_bin: int = 2

    def __post_init__(self):
        if not (0.0 <= self.delta < 1.0):
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")
        if not (-1.0 <= self.tau <= 1.0):
            raise ValueError(f"tau must lie in [-1, 1], got {self.tau}")


@dataclass(frozen=True)
class PartitionResult:
    groups: tuple[tuple[int, ...], ...]
    merged: tuple[Proposal, ...]
    affinity_matrix: np.ndarray
    proposals: tuple[Proposal, ...]  # full output: originals and/or merged per config


def expand_box(box: Box, delta: float, image_extent: tuple[int, int]) -> Box:
    """Scale width/height by (1+delta) about the center, then clip."""
    if not (0.0 <= delta < 1.0):
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    h, w = image_extent
    grown = Box(box.cx, box.cy, (1.0 + delta) * box.w, (1.0 + delta) * box.h)
    return grown.clip(h, w)


def pairwise_affinity(features: Sequence[np.ndarray]) -> np.ndarray:
    """Cosine similarity matrix; symmetric with unit diagonal, values in [-1, 1]."""
    if len(features) == 0:
        raise EmptyInputError("pairwise_affinity needs at least one feature vector")
    dims = {np.asarray(f).shape for f in features}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise ValueError(f"feature vectors must share one 1-D shape, got {sorted(dims)}")
    mat = np.stack([np.asarray(f, dtype=np.float64) for f in features])
    if not np.isfinite(mat).all():
        raise ValueError("feature vectors must be finite")
    norms = np.linalg.norm(mat, axis=1)
    for i, n in enumerate(norms):
        if n == 0.0:
            raise ZeroNormFeatureError(i)
    unit = mat / norms[:, None]
    aff = unit @ unit.T
    aff = np.clip((aff + aff.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(aff, 1.0)
    return aff


def cluster(affinity: np.ndarray, tau: float) -> list[list[int]]:
    """Greedy average-linkage agglomeration on (affinity - tau).

    Returns groups as sorted member lists, ordered by smallest member.
    """
    a = np.asarray(affinity, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise AffinityMatrixError(f"affinity must be square, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=1e-8):
        raise AffinityMatrixError("affinity matrix is not symmetric")
    if not np.allclose(np.diagonal(a), 1.0, atol=1e-9):
        raise AffinityMatrixError("affinity matrix must have a unit diagonal")
    n = a.shape[0]
    if n == 1:
        return [[0]]

    shifted = a - tau
    # avg[i, j]: average shifted affinity between clusters represented by i, j
    avg = shifted.copy()
    work = np.full((n, n), -np.inf)
    iu = np.triu_indices(n, k=1)
    work[iu] = shifted[iu]
    sizes = np.ones(n)
    members: list[list[int] | None] = [[i] for i in range(n)]
    active = np.ones(n, dtype=bool)
    last_merge_value = np.inf

    while True:
        flat = int(np.argmax(work))
        i, j = divmod(flat, n)
        best = work[i, j]
        if not best > 0.0:
            break
        # average linkage is reducible: chosen merge values never increase
        assert best <= last_merge_value + 1e-12
        last_merge_value = best

        si, sj = sizes[i], sizes[j]
        merged_row = (si * avg[i, :] + sj * avg[j, :]) / (si + sj)
        avg[i, :] = merged_row
        avg[:, i] = merged_row
        sizes[i] = si + sj
        members[i] = members[i] + members[j]  # type: ignore[operator]
        members[j] = None
        active[j] = False
        work[j, :] = -np.inf
        work[:, j] = -np.inf
        upd = active.copy()
        upd[i] = False
        idx = np.flatnonzero(upd)
        lo = idx[idx < i]
        hi = idx[idx > i]
        work[lo, i] = merged_row[lo]
        work[i, hi] = merged_row[hi]

    groups = [sorted(m) for m in members if m is not None]
    groups.sort(key=lambda g: g[0])
    return groups


def partition_objective(affinity: np.ndarray, groups: Sequence[Sequence[int]], tau: float) -> float:
    """Sum over groups of pairwise (affinity - tau) for unordered member pairs."""
    a = np.asarray(affinity, dtype=np.float64)
    total = 0.0
    for g in groups:
        g = list(g)
        for x in range(len(g)):
            for y in range(x + 1, len(g)):
                total += a[g[x], g[y]] - tau
    return total


def group_cohesion(affinity: np.ndarray, group: Sequence[int], tau: float) -> float:
    """Mean intra-group shifted affinity mapped to [0, 1]; singletons are 0.5."""
    g = list(group)
    if len(g) < 2:
        raw = 0.0
    else:
        vals = [affinity[g[x], g[y]] - tau for x in range(len(g)) for y in range(x + 1, len(g))]
        raw = float(np.mean(vals))
    return float(np.clip((raw + 1.0) / 2.0, 0.0, 1.0))


def merge_groups(
    parts: Sequence[Proposal], groups: Sequence[Sequence[int]], keep_originals: bool = True
) -> list[Proposal]:
    """Union each multi-member group into a merged proposal.

    Merged masks are pixelwise unions, merged boxes are the union's tight box,
    merged scores take the member maximum per component. Singleton groups emit
    no duplicate merged proposal. With keep_originals the output is all
    originals followed by the merged proposals; otherwise each group yields
    its merged proposal (or its lone member).
    """
    seen = sorted(i for g in groups for i in g)
    if seen != list(range(len(parts))):
        raise ValueError(f"groups must partition 0..{len(parts) - 1}, got {seen}")
    merged: list[Proposal] = []
    for g in groups:
        if len(g) < 2:
            continue
        sub = [parts[i] for i in g]
        mask = mask_union([p.mask for p in sub])
        merged.append(
            Proposal(
                box=mask.tight_box(),
                mask=mask,
                score_c=max(p.score_c for p in sub),
                score_b=max(p.score_b for p in sub),
                score_m=max(p.score_m for p in sub),
                provenance=Provenance.GROUPED,
            )
        )
    if keep_originals:
        return list(parts) + merged
    out: list[Proposal] = []
    mi = 0
    for g in groups:
        if len(g) < 2:
            out.append(parts[g[0]])
        else:
            out.append(merged[mi])
            mi += 1
    return out


def group_pipeline(
    parts: Sequence[Proposal],
    pyramid: FeaturePyramid,
    cfg: GroupingConfig = GroupingConfig(),
) -> PartitionResult:
    """expand -> pool -> affinity -> cluster -> merge, recording the affinity.

    Each emitted original inherits its group's cohesion as score_c so the
    no-learning ranking stage has a confidence surrogate; merged proposals
    take the member maximum, which equals the same cohesion.
    """
    if len(parts) == 0:
        raise EmptyInputError("group_pipeline needs at least one part")
    extent = (pyramid.image_height, pyramid.image_width)
    feats = [
        roi_align(pyramid, expand_box(p.box, cfg.delta, extent), cfg.grid, cfg.samples_per_bin)
        for p in parts
    ]
    affinity = pairwise_affinity(feats)
    groups = cluster(affinity, cfg.tau)
    scored = list(parts)
    for g in groups:
        c = group_cohesion(affinity, g, cfg.tau)
        for i in g:
            scored[i] = dataclasses.replace(parts[i], score_c=c)
    output = merge_groups(scored, groups, cfg.keep_originals)
    merged_only = tuple(p for p in output if p.provenance is Provenance.GROUPED)
    return PartitionResult(
        groups=tuple(tuple(g) for g in groups),
        merged=merged_only,
        affinity_matrix=affinity,
        proposals=tuple(output),
    )
