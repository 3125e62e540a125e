"""Iterative seed feedback: re-run walks with seeds promoted from results.

The loop treats segmentation as self-training.  After each walk, pixels with
probability within ``epsilon_seed`` of 0 or 1 become semi-seeds and enlarge
the background/foreground sets; the segmentation potential (negated summed
squared distance of probabilities from 0.5) tracks how confident the current
map is, and the loop stops once it plateaus.  ``run_irw`` repeats the basic
walk; ``run_ibrw`` additionally feeds the near-0.5 band into the
boundary-penalized walk each round.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvexityViolationError,
    DimensionMismatchError,
    InvalidInputError,
    NotPositiveDefiniteError,
    SolverFailureError,
)
from .formats import Trimap
from .graph import DEFAULT_BETA, DEFAULT_WEIGHT_FLOOR, ImageGrid, assemble_laplacian, compute_weights
from .solver import SolveOptions
from .walks import (
    ProbabilityMap,
    SeedState,
    boundary_random_walks,
    boundary_set,
    random_walks,
    solve_on_laplacian,
)

logger = logging.getLogger(__name__)

_EMPTY = np.zeros(0, dtype=np.int64)

# Relative plateau threshold applied when params.xi is left unset.
XI_RELATIVE_DEFAULT = 1e-3


@dataclass(frozen=True)
class FeedbackParams:
    """Knobs of the feedback loop.

    ``epsilon_seed``: promotion threshold, probabilities below it (above one
    minus it) become background (foreground) semi-seeds.  ``delta``: half
    width of the near-0.5 boundary band.  ``lam``: boundary repulsion
    trade-off.  ``xi``: stop once the potential decrease drops to this value
    or below; ``None`` resolves to 1e-3 of the initial potential magnitude.
    ``sample_fraction``: fraction of eligible semi-seeds actually promoted
    per round, drawn deterministically from ``rng_seed``.
    """

    epsilon_seed: float = 0.1
    delta: float = 0.1
    lam: float = 0.005
    xi: float | None = None
    max_outer_iterations: int = 10
    sample_fraction: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.epsilon_seed < 0.5):
            raise InvalidInputError(f"epsilon_seed must be in (0, 0.5), got {self.epsilon_seed}")
        if not (0.0 < self.delta < 0.5):
            raise InvalidInputError(f"delta must be in (0, 0.5), got {self.delta}")
        if self.lam < 0.0:
            raise InvalidInputError(f"lambda must be nonnegative, got {self.lam}")
        if self.xi is not None and self.xi < 0.0:
            raise InvalidInputError(f"xi must be nonnegative, got {self.xi}")
        if self.max_outer_iterations < 1:
            raise InvalidInputError("max_outer_iterations must be at least 1")
        if not (0.0 < self.sample_fraction <= 1.0):
            raise InvalidInputError(f"sample_fraction must be in (0, 1], got {self.sample_fraction}")

    def resolve_xi(self, initial_potential: float) -> float:
        if self.xi is not None:
            return self.xi
        return XI_RELATIVE_DEFAULT * abs(initial_potential)


@dataclass
class IterationRecord:
    """One row of the run trace; iteration 0 is the plain-walk initialization."""

    iteration: int
    potential: float
    boundary_count: int
    added_foreground: int
    added_background: int
    labels_hash: str
    error_count: int | None = None

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "potential": self.potential,
            "boundary_count": self.boundary_count,
            "added_foreground": self.added_foreground,
            "added_background": self.added_background,
            "labels_hash": self.labels_hash,
            "error_count": self.error_count,
        }


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    stop_reason: str = ""
    degraded: bool = False
    final_seeds: SeedState | None = None

    @property
    def iterations(self) -> int:
        """Outer iterations actually run (initialization excluded)."""
        return max(len(self.records) - 1, 0)

    @property
    def potentials(self) -> list[float]:
        return [r.potential for r in self.records]

    def record_dicts(self) -> list[dict]:
        return [r.to_dict() for r in self.records]


def segmentation_potential(pmap: ProbabilityMap) -> float:
    """Negated summed squared distance from 0.5, over every pixel.

    Zero is the worst case (everything maximally uncertain); -0.25 per pixel
    is full confidence.  Seeds contribute their constant -0.25 each.
    """
    return -float(np.sum(np.square(pmap.clamped - 0.5)))


def labels_digest(labels: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(labels).tobytes()).hexdigest()[:16]


def select_semi_seeds(
    pmap: ProbabilityMap,
    seeds: SeedState,
    params: FeedbackParams,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Promote confidently classified unseeded pixels to (fg, bg) semi-seeds.

    Candidates are unseeded pixels with probability below ``epsilon_seed``
    (background) or above ``1 - epsilon_seed`` (foreground).  When
    ``sample_fraction < 1`` each candidate set is subsampled without
    replacement, foreground draw first; passing ``rng`` lets a loop share one
    deterministic stream across rounds.
    """
    p = pmap.clamped.ravel()
    eligible = np.ones(p.size, dtype=bool)
    eligible[seeds.marked] = False
    new_bg = np.flatnonzero(eligible & (p < params.epsilon_seed))
    new_fg = np.flatnonzero(eligible & (p > 1.0 - params.epsilon_seed))
    if params.sample_fraction < 1.0:
        if rng is None:
            rng = np.random.default_rng(params.rng_seed)
        new_fg = _sample(new_fg, params.sample_fraction, rng)
        new_bg = _sample(new_bg, params.sample_fraction, rng)
    return new_fg, new_bg


def _sample(candidates: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    keep = int(round(fraction * candidates.size))
    if keep >= candidates.size:
        return candidates
    return np.sort(rng.choice(candidates, size=keep, replace=False))


def misclassified_count(labels: np.ndarray, ground_truth: Trimap) -> int:
    """Pixels labeled against the trimap, ignoring the unclassified band."""
    labels = np.asarray(labels, dtype=bool)
    if labels.shape != ground_truth.shape:
        raise DimensionMismatchError(
            f"labels shape {labels.shape} does not match trimap {ground_truth.shape}"
        )
    classified = ~ground_truth.unclassified_mask
    return int(np.count_nonzero(classified & (labels != ground_truth.foreground_mask)))


def error_rate(labels: np.ndarray, ground_truth: Trimap) -> float:
    """Misclassified pixels over the size of the trimap's unclassified band.

    The band normalizer follows the benchmark convention for scribble
    segmentation; when a trimap has no band at all the rate falls back to
    misclassified over total pixels (and 0.0 whenever nothing is wrong).
    """
    wrong = misclassified_count(labels, ground_truth)
    band = int(np.count_nonzero(ground_truth.unclassified_mask))
    if band == 0:
        if wrong == 0:
            return 0.0
        logger.warning("trimap has no unclassified band; normalizing by total pixels")
        return wrong / labels.size
    return wrong / band


def run_irw(
    img: ImageGrid,
    user_seeds: SeedState,
    params: FeedbackParams | None = None,
    opts: SolveOptions | None = None,
    *,
    beta: float = DEFAULT_BETA,
    floor: float = DEFAULT_WEIGHT_FLOOR,
    ground_truth: Trimap | None = None,
    on_iteration=None,
) -> tuple[ProbabilityMap, IterationTrace]:
    """Iterative walk: plain walk, promote semi-seeds, re-solve, repeat."""
    return _run_feedback(
        img, user_seeds, params or FeedbackParams(), opts, use_boundary=False,
        beta=beta, floor=floor, ground_truth=ground_truth, on_iteration=on_iteration,
    )


def run_ibrw(
    img: ImageGrid,
    user_seeds: SeedState,
    params: FeedbackParams | None = None,
    opts: SolveOptions | None = None,
    *,
    beta: float = DEFAULT_BETA,
    floor: float = DEFAULT_WEIGHT_FLOOR,
    ground_truth: Trimap | None = None,
    on_iteration=None,
) -> tuple[ProbabilityMap, IterationTrace]:
    """Iterative boundary walk: like :func:`run_irw`, but each round also
    recomputes the near-0.5 band and solves the boundary-penalized system.

    With ``lam == 0`` this degenerates to :func:`run_irw` exactly (same
    labels, same trace) for a matched ``rng_seed``.
    """
    return _run_feedback(
        img, user_seeds, params or FeedbackParams(), opts, use_boundary=True,
        beta=beta, floor=floor, ground_truth=ground_truth, on_iteration=on_iteration,
    )


ALGORITHMS = ("rw", "brw", "irw", "ibrw")


def run_algorithm(
    algorithm: str,
    img: ImageGrid,
    user_seeds: SeedState,
    params: FeedbackParams | None = None,
    opts: SolveOptions | None = None,
    *,
    beta: float = DEFAULT_BETA,
    floor: float = DEFAULT_WEIGHT_FLOOR,
    ground_truth: Trimap | None = None,
    on_iteration=None,
) -> tuple[ProbabilityMap, IterationTrace]:
    """Dispatch one of rw/brw/irw/ibrw under a uniform trace contract.

    The single-shot walks produce one record (rw) or two (brw: plain walk
    then the boundary-penalized pass on its near-0.5 band).
    """
    params = params or FeedbackParams()
    shared = dict(beta=beta, floor=floor, ground_truth=ground_truth, on_iteration=on_iteration)
    if algorithm == "irw":
        return run_irw(img, user_seeds, params, opts, **shared)
    if algorithm == "ibrw":
        return run_ibrw(img, user_seeds, params, opts, **shared)
    if algorithm == "rw":
        pmap = random_walks(img, user_seeds, beta=beta, floor=floor, opts=opts)
        trace = IterationTrace(stop_reason="single-shot", final_seeds=user_seeds)
        _record(trace, 0, pmap, user_seeds, params.delta, 0, 0, ground_truth)
        if on_iteration is not None:
            on_iteration(0, pmap)
        return pmap, trace
    if algorithm == "brw":
        init = random_walks(img, user_seeds, beta=beta, floor=floor, opts=opts)
        banded = user_seeds.with_boundary(boundary_set(init, user_seeds, params.delta))
        pmap = boundary_random_walks(img, banded, params.lam, beta=beta, floor=floor, opts=opts)
        trace = IterationTrace(stop_reason="single-shot", final_seeds=banded)
        _record(trace, 0, init, user_seeds, params.delta, 0, 0, ground_truth)
        _record(trace, 1, pmap, banded, params.delta, 0, 0, ground_truth)
        if on_iteration is not None:
            on_iteration(0, init)
            on_iteration(1, pmap)
        return pmap, trace
    raise InvalidInputError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def _record(
    trace: IterationTrace,
    iteration: int,
    pmap: ProbabilityMap,
    seeds: SeedState,
    delta: float,
    added_fg: int,
    added_bg: int,
    ground_truth: Trimap | None,
) -> None:
    trace.records.append(
        IterationRecord(
            iteration=iteration,
            potential=segmentation_potential(pmap),
            boundary_count=int(boundary_set(pmap, seeds, delta).size),
            added_foreground=added_fg,
            added_background=added_bg,
            labels_hash=labels_digest(pmap.labels),
            error_count=None if ground_truth is None else misclassified_count(pmap.labels, ground_truth),
        )
    )


def _run_feedback(
    img: ImageGrid,
    user_seeds: SeedState,
    params: FeedbackParams,
    opts: SolveOptions | None,
    use_boundary: bool,
    beta: float,
    floor: float,
    ground_truth: Trimap | None,
    on_iteration,
) -> tuple[ProbabilityMap, IterationTrace]:
    if ground_truth is not None and ground_truth.shape != img.shape:
        raise DimensionMismatchError(
            f"trimap shape {ground_truth.shape} does not match image {img.shape}"
        )
    weights = compute_weights(img, beta=beta, floor=floor)
    if use_boundary and not (0.0 <= params.lam <= weights.min_weight):
        raise ConvexityViolationError(params.lam, weights.min_weight)

    rng = np.random.default_rng(params.rng_seed)
    seeds = user_seeds.with_boundary(_EMPTY)
    trace = IterationTrace()

    lap = assemble_laplacian(weights, seeds)
    pmap = solve_on_laplacian(lap, seeds, 0.0, opts)
    potential = segmentation_potential(pmap)
    xi = params.resolve_xi(potential)
    _record(trace, 0, pmap, seeds, params.delta, 0, 0, ground_truth)
    if on_iteration is not None:
        on_iteration(0, pmap)

    prev_boundary = _EMPTY
    for k in range(1, params.max_outer_iterations + 1):
        new_fg, new_bg = select_semi_seeds(pmap, seeds, params, rng)
        enlarged = seeds.with_semi_seeds(new_fg, new_bg)
        band = boundary_set(pmap, enlarged, params.delta) if use_boundary else _EMPTY
        if use_boundary:
            enlarged = enlarged.with_boundary(band)

        # Re-solving an identical system is wasted work: same seeds and, when
        # the boundary term actually matters, the same band.
        unchanged = (
            new_fg.size == 0
            and new_bg.size == 0
            and (not use_boundary or params.lam == 0.0 or np.array_equal(band, prev_boundary))
        )
        if unchanged:
            trace.stop_reason = "fixed-point"
            break

        try:
            lap = assemble_laplacian(weights, enlarged)
            new_map = solve_on_laplacian(lap, enlarged, params.lam if use_boundary else 0.0, opts)
        except (SolverFailureError, NotPositiveDefiniteError) as exc:
            logger.warning("solver failed at iteration %d: %s", k, exc)
            trace.degraded = True
            trace.stop_reason = "solver-failure"
            break

        seeds, pmap, prev_boundary = enlarged, new_map, band
        new_potential = segmentation_potential(pmap)
        _record(trace, k, pmap, seeds, params.delta, new_fg.size, new_bg.size, ground_truth)
        if on_iteration is not None:
            on_iteration(k, pmap)
        decrease = potential - new_potential
        potential = new_potential
        if decrease <= xi:
            trace.stop_reason = "potential-plateau"
            break
    else:
        trace.stop_reason = "max-iterations"

    trace.final_seeds = seeds
    return pmap, trace
