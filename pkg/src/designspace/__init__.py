"""Design-space identification and flexibility analysis toolkit.

Samples a process model quasi-randomly, classifies outcomes against
performance constraints, encloses the satisfying point cloud in an explicit
alpha-shape boundary, and quantifies operational flexibility (acceptable
operating regions and multivariate proven acceptable ranges) around
candidate operating points.
"""

from .analysis import AorReport, compare_nops, find_aor, kpi_stats, mpar
from .geometry import (
    AlphaShape,
    Triangulation,
    alpha_shape,
    circumradius,
    contains,
    convex_hull,
    count_regions,
    delaunay,
    measure,
)
from .identify import (
    DesignSpaceResult,
    find_alpha_radius,
    identify_combinatorial,
    identify_resolution_support,
    identify_tolerance,
)
from .problem import Constraint, DesignProblem, LabeledCloud, classify, refine_bounds
from .sampling import Bounds, SampleBatch, sobol
from .surrogate import LinearInterpolator, MlpModel, TrainConfig, mpe, train

__version__ = "0.1.0"

__all__ = [
    "AlphaShape",
    "AorReport",
    "Bounds",
    "Constraint",
    "DesignProblem",
    "DesignSpaceResult",
    "LabeledCloud",
    "LinearInterpolator",
    "MlpModel",
    "SampleBatch",
    "TrainConfig",
    "Triangulation",
    "alpha_shape",
    "circumradius",
    "classify",
    "compare_nops",
    "contains",
    "convex_hull",
    "count_regions",
    "delaunay",
    "find_alpha_radius",
    "find_aor",
    "identify_combinatorial",
    "identify_resolution_support",
    "identify_tolerance",
    "kpi_stats",
    "measure",
    "mpar",
    "mpe",
    "refine_bounds",
    "sobol",
    "train",
]
