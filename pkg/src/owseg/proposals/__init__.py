"""Bottom-up part-mask proposal generation."""

from .graph import SegParams, graph_segment  # noqa: F401
from .grid import grid_proposals  # noqa: F401
from .selective import (  # noqa: F401
    Region,
    color_similarity,
    fill_similarity,
    region_similarity,
    selective_search,
    selective_search_multi,
    selective_search_regions,
    selective_search_with_levels,
    size_similarity,
    texture_similarity,
)
