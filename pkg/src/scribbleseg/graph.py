"""Weighted 4-connected grid graph over an image and its Laplacian blocks.

Pixels are vertices, horizontal/vertical neighbors are edges, and the edge
weight decays exponentially with the squared intensity difference.  The
Laplacian is assembled in two blocks: ``lu`` over unseeded vertices and the
``coupling`` block tying unseeded rows to seeded columns.  Everything here is
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from .errors import (
    ConflictingSeedsError,
    ConvexityViolationError,
    InvalidInputError,
    MissingSeedsError,
)

DEFAULT_BETA = 90.0
DEFAULT_WEIGHT_FLOOR = 1e-6


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """Rectangular pixel lattice of normalized intensities.

    ``intensity`` is (height, width) float64 in [0, 1].  ``channels``
    optionally keeps the original RGB triples (same range) for display; all
    computations use ``intensity`` only.
    """

    intensity: np.ndarray
    channels: np.ndarray | None = None

    def __post_init__(self):
        arr = np.asarray(self.intensity, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
            raise InvalidInputError(
                f"image must be at least 2x2 pixels, got shape {arr.shape}"
            )
        if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
            raise InvalidInputError("intensities must lie in [0, 1]")
        object.__setattr__(self, "intensity", _readonly(arr))
        if self.channels is not None:
            ch = np.asarray(self.channels, dtype=np.float64)
            if ch.shape != (*arr.shape, 3):
                raise InvalidInputError(
                    f"channels shape {ch.shape} does not match image {arr.shape}"
                )
            object.__setattr__(self, "channels", _readonly(ch))

    @property
    def height(self) -> int:
        return self.intensity.shape[0]

    @property
    def width(self) -> int:
        return self.intensity.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.intensity.shape

    @property
    def n_pixels(self) -> int:
        return self.intensity.size


@dataclass(frozen=True, eq=False)
class EdgeWeights:
    """Edge weights of the 4-connected lattice.

    ``horizontal[y, x]`` joins pixels (y, x) and (y, x+1); ``vertical[y, x]``
    joins (y, x) and (y+1, x).  One stored value per undirected edge, so
    symmetry holds by construction.  ``floor`` is the strictly positive
    offset added to every weight; ``min_weight`` caches the minimum, which
    bounds the feasible boundary trade-off range.
    """

    beta: float
    floor: float
    horizontal: np.ndarray
    vertical: np.ndarray
    min_weight: float

    def __post_init__(self):
        object.__setattr__(self, "horizontal", _readonly(np.asarray(self.horizontal, dtype=np.float64)))
        object.__setattr__(self, "vertical", _readonly(np.asarray(self.vertical, dtype=np.float64)))

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (self.vertical.shape[0] + 1, self.horizontal.shape[1] + 1)

    @property
    def n_edges(self) -> int:
        return self.horizontal.size + self.vertical.size

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat (i, j, weight) arrays over all undirected edges, row-major."""
        h, w = self.grid_shape
        flat = np.arange(h * w, dtype=np.int64).reshape(h, w)
        hi = flat[:, :-1].ravel()
        hj = flat[:, 1:].ravel()
        vi = flat[:-1, :].ravel()
        vj = flat[1:, :].ravel()
        i = np.concatenate([hi, vi])
        j = np.concatenate([hj, vj])
        vals = np.concatenate([self.horizontal.ravel(), self.vertical.ravel()])
        return i, j, vals


@dataclass(frozen=True, eq=False)
class SparseLaplacian:
    """Laplacian blocks for a given seed partition.

    ``lu`` is the symmetric block over unseeded vertices; ``coupling`` ties
    unseeded rows to seeded columns (entries are -w_ij).  ``unseeded`` and
    ``seeded`` give the flat lattice index of each matrix row/column, both in
    row-major order, so they double as the row<->pixel bijection.  ``degree``
    holds the full lattice degree of each unseeded vertex (equal to the
    diagonal of ``lu`` before any boundary modification).
    """

    lu: sparse.csr_matrix
    coupling: sparse.csr_matrix
    degree: np.ndarray
    unseeded: np.ndarray
    seeded: np.ndarray
    min_weight: float
    grid_shape: tuple[int, int]

    @property
    def n_unseeded(self) -> int:
        return len(self.unseeded)

    @property
    def n_seeded(self) -> int:
        return len(self.seeded)

    def rows_of(self, lattice_indices: np.ndarray) -> np.ndarray:
        """Map flat lattice indices of unseeded vertices to matrix rows."""
        lattice_indices = np.asarray(lattice_indices, dtype=np.int64)
        if lattice_indices.size == 0:
            return lattice_indices
        if self.n_unseeded == 0:
            raise InvalidInputError("some vertices are not unseeded rows of this system")
        pos = np.searchsorted(self.unseeded, lattice_indices)
        ok = (pos < len(self.unseeded)) & (
            self.unseeded[np.minimum(pos, len(self.unseeded) - 1)] == lattice_indices
        )
        if not ok.all():
            raise InvalidInputError("some vertices are not unseeded rows of this system")
        return pos


def compute_weights(
    img: ImageGrid,
    beta: float = DEFAULT_BETA,
    floor: float = DEFAULT_WEIGHT_FLOOR,
) -> EdgeWeights:
    """Exponential intensity-difference weights for every lattice edge.

    Squared differences are normalized by their maximum over all edges (zero
    for a constant image), so ``beta`` has an image-independent scale.  The
    weight of an edge is ``exp(-beta * nd2) + floor`` with ``nd2`` the
    normalized squared difference, hence every weight lies in
    ``(0, 1 + floor]``.
    """
    if beta < 0:
        raise InvalidInputError(f"beta must be nonnegative, got {beta}")
    if floor <= 0:
        raise InvalidInputError(f"weight floor must be positive, got {floor}")
    g = img.intensity
    dh = np.square(g[:, 1:] - g[:, :-1])
    dv = np.square(g[1:, :] - g[:-1, :])
    peak = max(dh.max(), dv.max())
    if peak > 0.0:
        dh = dh / peak
        dv = dv / peak
    wh = np.exp(-beta * dh) + floor
    wv = np.exp(-beta * dv) + floor
    min_weight = float(min(wh.min(), wv.min()))
    return EdgeWeights(beta=float(beta), floor=float(floor), horizontal=wh, vertical=wv, min_weight=min_weight)


def assemble_laplacian(weights: EdgeWeights, seeds) -> SparseLaplacian:
    """Build the unseeded Laplacian block and the seed coupling block.

    Requires nonempty, disjoint foreground and background seed sets.  Rows
    and columns follow row-major lattice order with seeded vertices removed,
    so identical inputs yield bit-identical sparse structures.
    """
    h, w = weights.grid_shape
    n = h * w
    fg = np.asarray(seeds.foreground, dtype=np.int64)
    bg = np.asarray(seeds.background, dtype=np.int64)
    if len(fg) == 0 or len(bg) == 0:
        raise MissingSeedsError("both foreground and background seeds are required")
    if np.intersect1d(fg, bg).size > 0:
        raise ConflictingSeedsError("foreground and background seeds overlap")
    marked = np.union1d(fg, bg)
    if marked[0] < 0 or marked[-1] >= n:
        raise InvalidInputError("seed index outside the image lattice")

    seeded_mask = np.zeros(n, dtype=bool)
    seeded_mask[marked] = True
    unseeded = np.flatnonzero(~seeded_mask)
    seeded = np.flatnonzero(seeded_mask)

    i, j, vals = weights.edge_arrays()
    degree = np.zeros(n, dtype=np.float64)
    np.add.at(degree, i, vals)
    np.add.at(degree, j, vals)

    row_of = np.full(n, -1, dtype=np.int64)
    row_of[unseeded] = np.arange(len(unseeded))
    col_of = np.full(n, -1, dtype=np.int64)
    col_of[seeded] = np.arange(len(seeded))

    ui = row_of[i]
    uj = row_of[j]
    both_u = (ui >= 0) & (uj >= 0)
    i_u_j_s = (ui >= 0) & (uj < 0)
    j_u_i_s = (uj >= 0) & (ui < 0)

    n_u, n_s = len(unseeded), len(seeded)
    lu_rows = np.concatenate([ui[both_u], uj[both_u], np.arange(n_u)])
    lu_cols = np.concatenate([uj[both_u], ui[both_u], np.arange(n_u)])
    lu_vals = np.concatenate([-vals[both_u], -vals[both_u], degree[unseeded]])
    lu = sparse.coo_matrix((lu_vals, (lu_rows, lu_cols)), shape=(n_u, n_u)).tocsr()
    lu.sort_indices()

    c_rows = np.concatenate([ui[i_u_j_s], uj[j_u_i_s]])
    c_cols = np.concatenate([col_of[j[i_u_j_s]], col_of[i[j_u_i_s]]])
    c_vals = np.concatenate([-vals[i_u_j_s], -vals[j_u_i_s]])
    coupling = sparse.coo_matrix((c_vals, (c_rows, c_cols)), shape=(n_u, n_s)).tocsr()
    coupling.sort_indices()

    return SparseLaplacian(
        lu=lu,
        coupling=coupling,
        degree=_readonly(degree[unseeded]),
        unseeded=_readonly(unseeded),
        seeded=_readonly(seeded),
        min_weight=weights.min_weight,
        grid_shape=(h, w),
    )


def apply_boundary_modification(
    lap: SparseLaplacian, boundary: np.ndarray, lam: float
) -> SparseLaplacian:
    """Subtract ``lam`` from the diagonal at every boundary-seed vertex.

    ``lam`` must lie in [0, min edge weight]; larger values are rejected,
    never clamped.  With ``lam == 0`` or an empty boundary set the input is
    returned unchanged (same object), which keeps the zero-trade-off path
    bit-identical to the unmodified walk.
    """
    if not (0.0 <= lam <= lap.min_weight):
        raise ConvexityViolationError(lam, lap.min_weight)
    boundary = np.asarray(boundary, dtype=np.int64)
    if lam == 0.0 or boundary.size == 0:
        return lap
    rows = lap.rows_of(boundary)
    indicator = np.zeros(lap.n_unseeded, dtype=np.float64)
    indicator[rows] = 1.0
    lu = (lap.lu - lam * sparse.diags(indicator)).tocsr()
    lu.sort_indices()
    return replace(lap, lu=lu)
