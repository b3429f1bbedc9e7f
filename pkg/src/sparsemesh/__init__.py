"""Hierarchically well-spaced point sets with approximate Delaunay graphs.

The entry point for most uses is :func:`well_spaced_points`, which takes an
(n, d) array and returns the refined layered point set together with its
maintained neighbor graph. No full triangulation is ever built; everything
runs on greedy insertion order, graph walks, and per-cell corner queries.
"""

from .adg import KIND_CAGE, KIND_INPUT, KIND_STEINER, Hierarchy, MeshStore, VertexRecord
from .cage import Cage, build_cage, get_cage, place_cage
from .config import Config
from .errors import (
    ConfigurationError,
    IngestionError,
    InternalInvariantError,
    ResourceLimitError,
)
from .greedy import GreedyOrder, greedy_permutation
from .locate import greedy_walk
from .lp import (
    approximate_farthest_corner,
    cone_volume_lower_bound,
    ellipsoid_feasible,
    extremal_in_direction,
    HalfspaceSet,
)
from .refine import Refiner, RefinementQueue, RunResult, flatten, well_spaced_points

__version__ = "0.1.0"

__all__ = [
    "Cage",
    "Config",
    "ConfigurationError",
    "GreedyOrder",
    "Hierarchy",
    "HalfspaceSet",
    "IngestionError",
    "InternalInvariantError",
    "KIND_CAGE",
    "KIND_INPUT",
    "KIND_STEINER",
    "MeshStore",
    "Refiner",
    "RefinementQueue",
    "ResourceLimitError",
    "RunResult",
    "VertexRecord",
    "approximate_farthest_corner",
    "build_cage",
    "cone_volume_lower_bound",
    "ellipsoid_feasible",
    "extremal_in_direction",
    "flatten",
    "get_cage",
    "greedy_permutation",
    "greedy_walk",
    "place_cage",
    "well_spaced_points",
    "__version__",
]
