"""gridlip: separated nets, density encodings, and bottleneck grid assignments.

The package studies how well a finite set of n^d points can be mapped onto
the full grid [n]^d without stretching distances: it forges test densities
whose cube averages oscillate, encodes densities into separated point sets,
brackets the optimal bottleneck Lipschitz constant with certified lower and
upper bounds, and provides 1-D fold constructions plus degree/regularity
instruments for piecewise-affine maps.
"""
from .assignment import (
    AnnealSchedule,
    Assignment,
    BoundsReport,
    counting_lower_bound,
    lex_sort_assignment,
    lipschitz_constant,
    mcshane_extend,
    pushforward_check,
    solve_exact,
    solve_heuristic,
    stretch_spectrum,
)
from .densities import (
    ChessboardSpec,
    adjacent_average_gap,
    chessboard,
    linf_chessboard,
    min_chessboard_resolution,
    perturb_density,
)
from .dichotomy import (
    DichotomyParams,
    ProbeInconclusive,
    ProbeVerdict,
    build_nested_families,
    dichotomy_probe,
    iteration_bound,
    min_resolution,
    params_1d,
    params_nd,
    sample_translation_cuboid,
)
from .encoder import (
    DiscreteMeasure,
    EncoderStage,
    SeparatedSet,
    discrete_measure_deviation,
    encode_stage,
    integerize,
    normalize_density,
    plan_stage,
)
from .geometry import (
    Box,
    Cube,
    GridDensity,
    TiledFamily,
    cell_average,
    cube_intersection_measure,
    density_cell_overlaps,
    overlap_fraction,
    region_integral,
)
from .maps import SampledMap, TriangulatedMap, bilipschitz_constants
from .pipeline import ExperimentConfig, PipelineError, render_plot, run_pipeline
from .regularity import (
    AmbiguousPreimage,
    FatCantorSpec,
    PiecewiseLinear1D,
    covering_regularity,
    fold_map,
    iterated_fold,
    iterated_fold_detail,
    measure_regularity_probe,
    preimage_count,
    topological_degree,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousPreimage",
    "AnnealSchedule",
    "Assignment",
    "BoundsReport",
    "Box",
    "ChessboardSpec",
    "Cube",
    "DichotomyParams",
    "DiscreteMeasure",
    "EncoderStage",
    "ExperimentConfig",
    "FatCantorSpec",
    "GridDensity",
    "PiecewiseLinear1D",
    "PipelineError",
    "ProbeInconclusive",
    "ProbeVerdict",
    "SampledMap",
    "SeparatedSet",
    "TiledFamily",
    "TriangulatedMap",
    "adjacent_average_gap",
    "bilipschitz_constants",
    "build_nested_families",
    "cell_average",
    "chessboard",
    "counting_lower_bound",
    "covering_regularity",
    "cube_intersection_measure",
    "density_cell_overlaps",
    "dichotomy_probe",
    "discrete_measure_deviation",
    "encode_stage",
    "fold_map",
    "integerize",
    "iterated_fold",
    "iterated_fold_detail",
    "iteration_bound",
    "lex_sort_assignment",
    "linf_chessboard",
    "lipschitz_constant",
    "mcshane_extend",
    "measure_regularity_probe",
    "min_chessboard_resolution",
    "min_resolution",
    "normalize_density",
    "overlap_fraction",
    "params_1d",
    "params_nd",
    "perturb_density",
    "plan_stage",
    "preimage_count",
    "pushforward_check",
    "region_integral",
    "render_plot",
    "run_pipeline",
    "sample_translation_cuboid",
    "solve_exact",
    "solve_heuristic",
    "stretch_spectrum",
    "topological_degree",
]
