"""Graph-based oversegmentation on the 8-connected pixel grid.

Edges carry Euclidean RGB distance (0-255 scale) after optional Gaussian
smoothing. Components merge while the connecting edge weight stays below
min(Int(C1) + k/|C1|, Int(C2) + k/|C2|); a final pass absorbs components
below min_size. Ties between equal-weight edges resolve in construction
order (right, down, down-right, down-left batches), so output is
deterministic for fixed params.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from ..errors import EmptyInputError


@dataclass(frozen=True)
class SegParams:
    scale_k: float = 50.0
    sigma: float = 0.8
    min_size: int = 20

    def __post_init__(self):
        if not self.scale_k > 0:
            raise ValueError(f"scale_k must be > 0, got {self.scale_k}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.min_size < 1:
            raise ValueError(f"min_size must be >= 1, got {self.min_size}")


def _build_edges(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint index arrays for the 8-connected grid, fixed batch order."""
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    pairs = []
    if w > 1:  # right
        pairs.append((idx[:, :-1].ravel(), idx[:, 1:].ravel()))
    if h > 1:  # down
        pairs.append((idx[:-1, :].ravel(), idx[1:, :].ravel()))
    if h > 1 and w > 1:  # down-right
        pairs.append((idx[:-1, :-1].ravel(), idx[1:, 1:].ravel()))
    if h > 1 and w > 1:  # down-left
        pairs.append((idx[:-1, 1:].ravel(), idx[1:, :-1].ravel()))
    if not pairs:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    a = np.concatenate([p[0] for p in pairs])
    b = np.concatenate([p[1] for p in pairs])
    return a, b


def graph_segment(image: np.ndarray, params: SegParams) -> np.ndarray:
    """Segment an RGB raster into connected components.

    Returns an int32 label map (h, w); labels are 0..n-1 in order of first
    appearance in raster scan.
    """
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] == 0 or img.shape[1] == 0:
        raise EmptyInputError(f"expected nonempty (h, w, 3) image, got shape {img.shape}")
    h, w = img.shape[:2]
    smooth = img.astype(np.float64)
    if params.sigma > 0:
        smooth = gaussian_filter(smooth, sigma=(params.sigma, params.sigma, 0.0), mode="nearest")

    ea, eb = _build_edges(h, w)
    flat = smooth.reshape(-1, 3)
    weights = np.sqrt(((flat[ea] - flat[eb]) ** 2).sum(axis=1))
    order = np.argsort(weights, kind="stable")
    ea_s = ea[order].tolist()
    eb_s = eb[order].tolist()
    w_s = weights[order].tolist()

    n = h * w
    parent = list(range(n))
    size = [1] * n
    thresh = [params.scale_k] * n

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    k = params.scale_k
    for a, b, wt in zip(ea_s, eb_s, w_s):
        ra = find(a)
        rb = find(b)
        if ra == rb:
            continue
        if wt <= thresh[ra] and wt <= thresh[rb]:
            parent[rb] = ra
            size[ra] += size[rb]
            thresh[ra] = wt + k / size[ra]

    if params.min_size > 1:
        ms = params.min_size
        for a, b in zip(ea_s, eb_s):
            ra = find(a)
            rb = find(b)
            if ra != rb and (size[ra] < ms or size[rb] < ms):
                parent[rb] = ra
                size[ra] += size[rb]

    labels = np.empty(n, dtype=np.int32)
    remap: dict[int, int] = {}
    for i in range(n):
        r = find(i)
        lab = remap.get(r)
        if lab is None:
            lab = len(remap)
            remap[r] = lab
        labels[i] = lab
    return labels.reshape(h, w)
