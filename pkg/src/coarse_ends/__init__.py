"""Filtered ends of pairs (X, C) and coarse geometry of subgroup pairs on truncated spaces."""

from .coarse_space import (
    CoordinateSpace,
    FiniteSpace,
    FormulaSpace,
    GraphSpace,
    MatrixSpace,
    ProductRowSpace,
    ScalePair,
    TruncationRule,
    complement_of_neighborhood,
    distance_to_subset,
    sigma_components,
    transition_map,
    truncated_hausdorff,
)
from .errors import (
    CapacityError,
    CoarseEndsError,
    ConfigurationError,
    ConsistencyError,
    DomainError,
    OrderError,
    SchemaError,
)
from .filtered_ends import (
    EndsConfig,
    classical_ends,
    ends_diagram,
    filtered_ends,
    induced_end_map,
    ray_witnesses,
)
from .group_models import (
    DirectProduct,
    FreeAbelian,
    FreeGroup,
    FreeProduct,
    SubsetSpec,
    build_cayley_ball,
    trace_subset,
    word_distance,
)
from .pair_geometry import (
    approx_stabilizer,
    coarse_connectedness_scale,
    commensurator_probe,
    enumerate_cosets,
    induce_finite_index_collection,
    pair_qi_check,
    perpendicularity_bound,
)

__version__ = "0.1.0"
