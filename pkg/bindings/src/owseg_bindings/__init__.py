"""Thin in-process bindings over the owseg pipeline's external interfaces.

The three entry points wrap the same JSON record schemas the CLI subcommands
read and write, so results are element-for-element identical to running the
corresponding subcommand on the same inputs. Image pixels enter as
channel-first 8-bit buffers; the binding layer performs exactly one buffer
copy per call (the channel-first to height-major conversion).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from owseg import __version__ as _core_version
from owseg.errors import OwsegError

__version__ = _core_version

__all__ = [
    "BindingError",
    "BoundArrayImage",
    "bound_propose",
    "bound_group",
    "bound_evaluate",
    "__version__",
]


class BindingError(Exception):
    """Binding-level failure; wraps the core error as its cause."""


def _wrap(exc: Exception) -> BindingError:
    err = BindingError(f"{type(exc).__name__}: {exc}")
    err.__cause__ = exc
    return err


@dataclass(frozen=True)
class BoundArrayImage:
    """Channel-first 8-bit RGB image view: a contiguous buffer of exactly
    height*width*3 bytes laid out as (3, height, width)."""

    height: int
    width: int
    data: bytes | bytearray | memoryview | np.ndarray

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise BindingError(f"image extent must be positive, got {self.height}x{self.width}")
        if isinstance(self.data, np.ndarray):
            if self.data.dtype != np.uint8:
                raise BindingError(f"buffer must be uint8, got {self.data.dtype}")
            if not self.data.flags["C_CONTIGUOUS"]:
                raise BindingError("buffer must be C-contiguous")
            nbytes = self.data.size
        else:
            nbytes = len(self.data)
        expected = self.height * self.width * 3
        if nbytes != expected:
            raise BindingError(
                f"buffer holds {nbytes} bytes, expected {self.height}x{self.width}x3 = {expected}"
            )

    def to_rgb_array(self) -> np.ndarray:
        """(h, w, 3) uint8 array; the single buffer copy of the call."""
        flat = np.frombuffer(memoryview(self.data), dtype=np.uint8)
        chw = flat.reshape(3, self.height, self.width)
        return np.ascontiguousarray(np.moveaxis(chw, 0, 2))


def _as_bound_image(image) -> BoundArrayImage:
    if isinstance(image, BoundArrayImage):
        return image
    arr = np.asarray(image)
    if arr.ndim == 3 and arr.shape[0] == 3:
        return BoundArrayImage(arr.shape[1], arr.shape[2], np.ascontiguousarray(arr))
    raise BindingError(f"expected BoundArrayImage or (3, h, w) uint8 array, got shape {arr.shape}")


def bound_propose(
    image,
    params: dict | None = None,
    image_id: int = 0,
    file_name: str = "image_0000",
) -> dict:
    """Bottom-up proposals for one image buffer.

    Returns the proposals-JSON object ({"schema_version", "images": [...]})
    the `propose` subcommand would emit for a directory holding this image.
    params keys mirror the CLI flags: algo, k, sigma, min_size, cell, weights.
    """
    from owseg.proposals import SegParams, graph_segment, grid_proposals
    from owseg.proposals.selective import _dedup_by_box, selective_search_with_levels
    from owseg.masks import BinaryMask, Proposal, Provenance
    from owseg.schemas import ImageProposals, proposals_to_json

    p = dict(params or {})
    algo = p.pop("algo", "selsearch")
    seg = {k: p.pop(k) for k in ("k", "sigma", "min_size") if k in p}
    cell = p.pop("cell", 64)
    weights = tuple(p.pop("weights", (1.0, 1.0, 1.0, 1.0)))
    if p:
        raise BindingError(f"unknown propose params: {sorted(p)}")

    img = _as_bound_image(image).to_rgb_array()
    try:
        seg_params = SegParams(
            scale_k=seg.get("k", 50.0),
            sigma=seg.get("sigma", 0.8),
            min_size=seg.get("min_size", 20),
        )
        if algo == "selsearch":
            props, levels = selective_search_with_levels(img, seg_params, weights)
        elif algo == "fzs":
            labels = graph_segment(img, seg_params)
            props = _dedup_by_box(
                [
                    Proposal.from_mask(
                        BinaryMask(labels == i), provenance=Provenance.UNSUPERVISED
                    )
                    for i in range(int(labels.max()) + 1)
                ]
            )
            levels = [0] * len(props)
        elif algo == "grid":
            props = grid_proposals(img.shape[0], img.shape[1], cell)
            levels = [0] * len(props)
        else:
            raise BindingError(f"unknown algo {algo!r}")
        rec = ImageProposals(
            image_id=image_id,
            file_name=file_name,
            height=img.shape[0],
            width=img.shape[1],
            proposals=props,
            levels=levels,
        )
        return proposals_to_json([rec])
    except OwsegError as exc:
        raise _wrap(exc) from exc


def bound_group(
    parts: dict,
    feature_source: str = "handcrafted",
    delta: float = 0.1,
    tau: float = 0.5,
    input_dir: str | Path | None = None,
    keep_originals: bool = True,
    max_part_area_frac: float = 0.35,
) -> dict:
    """Group part records into whole-object proposals.

    parts is a proposals-JSON object; feature_source is "handcrafted" (needs
    input_dir with the image files) or "tensor:DIR". Returns the grouped-JSON
    object identical to the `group` subcommand's output.
    """
    from owseg.grouping import GroupingConfig
    from owseg.pipeline import run_group
    from owseg.schemas import proposals_from_json, proposals_to_json

    try:
        images = proposals_from_json(parts, where="parts")
        gcfg = GroupingConfig(delta=delta, tau=tau, keep_originals=keep_originals)
        grouped = run_group(
            images, input_dir, feature_source, gcfg, max_part_area_frac, workers=1
        )
        return proposals_to_json(grouped)
    except OwsegError as exc:
        raise _wrap(exc) from exc
    except ValueError as exc:
        raise _wrap(exc) from exc


def bound_evaluate(gt_path: str | Path, results_path: str | Path, ks=(100, 300), kind="mask") -> dict:
    """Average-recall report for a results file against COCO-style ground
    truth; identical to the `eval` subcommand's report JSON."""
    from owseg.pipeline import run_eval
    from owseg.schemas import load_json, report_to_json

    try:
        report = run_eval(gt_path, load_json(results_path), tuple(ks), (kind,))
        return report_to_json(report, list(ks))
    except OwsegError as exc:
        raise _wrap(exc) from exc
