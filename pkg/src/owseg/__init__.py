"""Open-world instance segmentation toolkit.

Bottom-up part proposals, affinity-based part grouping, proposal ranking,
and class-agnostic average-recall evaluation over COCO-style artifacts.
"""

__version__ = "0.1.0"

from .masks import (  # noqa: F401
    BinaryMask,
    Box,
    LabelSet,
    Proposal,
    Provenance,
    box_iou,
    decode_segmentation,
    encode_segmentation,
    mask_iou,
    mask_union,
    rle_decode,
    rle_encode,
    rle_from_string,
    rle_to_string,
)
