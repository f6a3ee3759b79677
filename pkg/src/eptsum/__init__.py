"""Edge partition trees of vertex-weighted trees: balanced construction,
exact optimisation, and checks of the 1.5-approximation guarantee."""

from .balanced import (
    build_balanced_fast,
    build_balanced_naive,
    caterpillar_prefix,
    sort_incident_components,
)
from .ept import (
    AugTree,
    CostBreakdown,
    Ept,
    ValidationReport,
    aug_sum,
    augment,
    correctly_placed_all,
    ept_from_json,
    ept_sum_edges,
    ept_sum_leaves,
    ept_to_json,
    split,
    validate_ept,
)
from .oracle import (
    enumerate_labeled_trees,
    optimal_ept_sum,
    prufer_decode,
    random_tree,
    random_weights,
)
from .tree import (
    CutResult,
    InputTree,
    InvalidTreeError,
    WeightOverflowError,
    component_weights,
    find_balanced_edge,
    find_centroid,
    format_tree,
    parse_tree,
)

__version__ = "0.1.0"
