"""Scribble-seeded interactive image segmentation.

Core pipeline: an image becomes a weighted 4-connected grid graph; seeded
walks solve a sparse harmonic system for per-pixel foreground probabilities;
a feedback loop promotes confident pixels to new seeds and optionally pushes
near-0.5 boundary pixels away from the fence, re-solving until the
segmentation potential plateaus.
"""

from .errors import (
    ConflictingSeedsError,
    ConvexityViolationError,
    DimensionMismatchError,
    FormatError,
    InvalidInputError,
    MissingSeedsError,
    NotPositiveDefiniteError,
    OracleTooLargeError,
    ScribbleSegError,
    SingularSystemError,
    SolverFailureError,
)
from .feedback import (
    ALGORITHMS,
    FeedbackParams,
    IterationRecord,
    IterationTrace,
    error_rate,
    misclassified_count,
    run_algorithm,
    run_ibrw,
    run_irw,
    segmentation_potential,
    select_semi_seeds,
)
from .formats import (
    SeedMask,
    Trimap,
    encode_labels_png,
    encode_probability_png,
    encode_probability_raster,
    image_from_bytes,
    load_image,
    load_probability_raster,
    load_seed_mask,
    load_trimap,
    save_labels,
    save_probability_map,
    save_seed_mask,
)
from .graph import (
    DEFAULT_BETA,
    DEFAULT_WEIGHT_FLOOR,
    EdgeWeights,
    ImageGrid,
    SparseLaplacian,
    apply_boundary_modification,
    assemble_laplacian,
    compute_weights,
)
from .solver import SolveOptions, dense_oracle_solve, solve_system
from .walks import (
    ProbabilityMap,
    SeedState,
    boundary_random_walks,
    boundary_set,
    random_walks,
)

__version__ = "0.1.0"

__all__ = [
    "ImageGrid",
    "EdgeWeights",
    "SparseLaplacian",
    "SeedState",
    "ProbabilityMap",
    "SeedMask",
    "Trimap",
    "FeedbackParams",
    "IterationRecord",
    "IterationTrace",
    "SolveOptions",
    "compute_weights",
    "assemble_laplacian",
    "apply_boundary_modification",
    "solve_system",
    "dense_oracle_solve",
    "random_walks",
    "boundary_random_walks",
    "boundary_set",
    "segmentation_potential",
    "select_semi_seeds",
    "run_irw",
    "run_ibrw",
    "run_algorithm",
    "ALGORITHMS",
    "error_rate",
    "misclassified_count",
    "load_image",
    "image_from_bytes",
    "load_seed_mask",
    "save_seed_mask",
    "load_trimap",
    "save_probability_map",
    "load_probability_raster",
    "save_labels",
    "encode_probability_png",
    "encode_probability_raster",
    "encode_labels_png",
    "DEFAULT_BETA",
    "DEFAULT_WEIGHT_FLOOR",
    "ScribbleSegError",
    "InvalidInputError",
    "MissingSeedsError",
    "ConflictingSeedsError",
    "DimensionMismatchError",
    "FormatError",
    "ConvexityViolationError",
    "SolverFailureError",
    "NotPositiveDefiniteError",
    "SingularSystemError",
    "OracleTooLargeError",
]
