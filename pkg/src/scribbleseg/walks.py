"""Probability maps from seeded walks on the image graph.

``random_walks`` solves the classic seed-conditioned harmonic system: each
unseeded pixel gets the probability that a walker starting there reaches a
foreground seed before a background seed.  ``boundary_random_walks`` solves
the variant with a penalty that pushes designated boundary pixels away from
probability 0.5, realized as a diagonal modification plus a constant forcing
term on those rows.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConflictingSeedsError, InvalidInputError
from .graph import (
    DEFAULT_BETA,
    DEFAULT_WEIGHT_FLOOR,
    ImageGrid,
    SparseLaplacian,
    apply_boundary_modification,
    assemble_laplacian,
    compute_weights,
)
from .solver import SolveOptions, solve_system

_EMPTY = np.zeros(0, dtype=np.int64)


def _canonical(idx) -> np.ndarray:
    out = np.unique(np.asarray(idx, dtype=np.int64))
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class SeedState:
    """Foreground, background and boundary pixel sets (flat lattice indices).

    ``foreground_auto``/``background_auto`` are the subsets that were promoted
    automatically by the feedback loop; everything else is user provenance.
    User seeds are never removed by library code: enlargement goes through
    :meth:`with_semi_seeds`, which only appends.
    """

    foreground: np.ndarray
    background: np.ndarray
    boundary: np.ndarray = _EMPTY
    foreground_auto: np.ndarray = _EMPTY
    background_auto: np.ndarray = _EMPTY

    def __post_init__(self):
        for name in ("foreground", "background", "boundary", "foreground_auto", "background_auto"):
            object.__setattr__(self, name, _canonical(getattr(self, name)))
        if np.intersect1d(self.foreground, self.background).size > 0:
            raise ConflictingSeedsError("foreground and background seeds overlap")
        marked = np.union1d(self.foreground, self.background)
        if np.intersect1d(self.boundary, marked).size > 0:
            raise InvalidInputError("boundary seeds must be unseeded pixels")
        if np.setdiff1d(self.foreground_auto, self.foreground).size > 0:
            raise InvalidInputError("foreground_auto is not a subset of foreground")
        if np.setdiff1d(self.background_auto, self.background).size > 0:
            raise InvalidInputError("background_auto is not a subset of background")

    @classmethod
    def from_masks(cls, foreground_mask: np.ndarray, background_mask: np.ndarray) -> "SeedState":
        return cls(
            foreground=np.flatnonzero(np.asarray(foreground_mask).ravel()),
            background=np.flatnonzero(np.asarray(background_mask).ravel()),
        )

    @property
    def user_foreground(self) -> np.ndarray:
        return np.setdiff1d(self.foreground, self.foreground_auto)

    @property
    def user_background(self) -> np.ndarray:
        return np.setdiff1d(self.background, self.background_auto)

    @property
    def marked(self) -> np.ndarray:
        return np.union1d(self.foreground, self.background)

    def provenance(self, index: int) -> str:
        """'user' or 'auto' for a seed pixel; raises for unseeded pixels."""
        if index in self.foreground_auto or index in self.background_auto:
            return "auto"
        if index in self.foreground or index in self.background:
            return "user"
        raise InvalidInputError(f"pixel {index} is not a seed")

    def with_semi_seeds(self, new_foreground, new_background) -> "SeedState":
        """Append automatically selected seeds; never drops existing ones."""
        new_fg = _canonical(new_foreground)
        new_bg = _canonical(new_background)
        if np.intersect1d(new_fg, self.marked).size or np.intersect1d(new_bg, self.marked).size:
            raise ConflictingSeedsError("semi-seeds overlap existing seeds")
        return SeedState(
            foreground=np.union1d(self.foreground, new_fg),
            background=np.union1d(self.background, new_bg),
            boundary=np.setdiff1d(self.boundary, np.union1d(new_fg, new_bg)),
            foreground_auto=np.union1d(self.foreground_auto, new_fg),
            background_auto=np.union1d(self.background_auto, new_bg),
        )

    def with_boundary(self, boundary) -> "SeedState":
        return replace(self, boundary=_canonical(boundary))


@dataclass(frozen=True, eq=False)
class ProbabilityMap:
    """Per-pixel foreground probabilities.

    ``raw`` stitches solver output with the fixed seed values (exactly 1 on
    foreground, 0 on background).  The boundary-penalized walk may push raw
    values slightly outside [0, 1]; ``clamped`` limits them, and ``labels``
    thresholds the clamped map at 0.5 (strictly greater is foreground, a tie
    is background).
    """

    raw: np.ndarray
    clamped: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_solution(
        cls,
        grid_shape: tuple[int, int],
        unseeded: np.ndarray,
        solution: np.ndarray,
        seeds: SeedState,
    ) -> "ProbabilityMap":
        flat = np.zeros(grid_shape[0] * grid_shape[1], dtype=np.float64)
        flat[unseeded] = solution
        flat[seeds.foreground] = 1.0
        flat[seeds.background] = 0.0
        raw = flat.reshape(grid_shape)
        clamped = np.clip(raw, 0.0, 1.0)
        labels = clamped > 0.5
        for arr in (raw, clamped, labels):
            arr.flags.writeable = False
        return cls(raw=raw, clamped=clamped, labels=labels)

    @property
    def shape(self) -> tuple[int, int]:
        return self.raw.shape


def _seed_values(lap: SparseLaplacian, seeds: SeedState) -> np.ndarray:
    values = np.zeros(lap.n_seeded, dtype=np.float64)
    fg_cols = np.searchsorted(lap.seeded, seeds.foreground)
    values[fg_cols] = 1.0
    return values


def _solve_map(
    img: ImageGrid,
    seeds: SeedState,
    lam: float,
    beta: float,
    floor: float,
    opts: SolveOptions | None,
) -> ProbabilityMap:
    weights = compute_weights(img, beta=beta, floor=floor)
    lap = assemble_laplacian(weights, seeds)
    return solve_on_laplacian(lap, seeds, lam, opts)


def solve_on_laplacian(
    lap: SparseLaplacian,
    seeds: SeedState,
    lam: float,
    opts: SolveOptions | None = None,
) -> ProbabilityMap:
    """Run the (possibly boundary-penalized) walk on a prebuilt Laplacian.

    With ``lam == 0`` this is exactly the basic walk, bit for bit: the system
    and right-hand side are untouched.
    """
    modified = apply_boundary_modification(lap, seeds.boundary, lam)
    rhs = -(modified.coupling @ _seed_values(modified, seeds))
    if modified.n_unseeded and seeds.boundary.size:
        rhs[modified.rows_of(seeds.boundary)] -= 0.5 * lam
    solution = solve_system(modified, rhs, opts)
    return ProbabilityMap.from_solution(modified.grid_shape, modified.unseeded, solution, seeds)


def random_walks(
    img: ImageGrid,
    seeds: SeedState,
    beta: float = DEFAULT_BETA,
    floor: float = DEFAULT_WEIGHT_FLOOR,
    opts: SolveOptions | None = None,
) -> ProbabilityMap:
    """Basic seeded walk: harmonic interpolation between the seed values."""
    return _solve_map(img, seeds, lam=0.0, beta=beta, floor=floor, opts=opts)


def boundary_random_walks(
    img: ImageGrid,
    seeds: SeedState,
    lam: float,
    beta: float = DEFAULT_BETA,
    floor: float = DEFAULT_WEIGHT_FLOOR,
    opts: SolveOptions | None = None,
) -> ProbabilityMap:
    """Walk with a repulsion term on ``seeds.boundary`` pixels.

    ``lam`` trades smoothness against pushing boundary pixels away from 0.5
    and must lie within [0, min edge weight] for the problem to stay convex.
    """
    return _solve_map(img, seeds, lam=lam, beta=beta, floor=floor, opts=opts)


def boundary_set(pmap: ProbabilityMap, seeds: SeedState, delta: float) -> np.ndarray:
    """Unseeded pixels whose clamped probability is within ``delta`` of 0.5.

    These concentrate along the segmentation contour and are the pixels most
    likely to be misclassified.  Foreground/background seeds are excluded by
    construction (their probabilities are exact 0/1 anyway).
    """
    if not (0.0 < delta < 0.5):
        raise InvalidInputError(f"delta must be in (0, 0.5), got {delta}")
    near = np.abs(pmap.clamped.ravel() - 0.5) < delta
    near[seeds.foreground] = False
    near[seeds.background] = False
    return np.flatnonzero(near)
