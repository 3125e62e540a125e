"""Solves the seed-conditioned sparse systems, plus a dense verification oracle.

The default path is Jacobi-preconditioned conjugate gradient (compiled kernel
when built, numpy twin otherwise).  A solve counts as converged only when the
residual passes both a relative 2-norm bound and a diagonally scaled
componentwise bound; the latter is what makes the per-pixel averaging
equations hold to tolerance even at vertices with very small degree.

``dense_oracle_solve`` is deliberately a different route: densify and
eliminate with partial pivoting (LAPACK).  Tests cross-check the two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import (
    NotPositiveDefiniteError,
    OracleTooLargeError,
    SingularSystemError,
    SolverFailureError,
)
from .graph import SparseLaplacian

DENSE_ORACLE_LIMIT = 4096
_MAX_RESTARTS = 3


@dataclass(frozen=True)
class SolveOptions:
    """Solver controls.

    ``max_iterations=None`` means 10x the number of unknowns.  ``method`` is
    ``"pcg"`` (iterative with diagonal preconditioner) or ``"dense"``
    (direct Cholesky, which also certifies positive definiteness).
    """

    tolerance: float = 1e-8
    max_iterations: int | None = None
    method: str = "pcg"

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.method not in ("pcg", "dense"):
            raise ValueError(f"unknown method {self.method!r}")


def solve_system(
    lap: SparseLaplacian, rhs: np.ndarray, opts: SolveOptions | None = None
) -> np.ndarray:
    """Solve ``lap.lu @ x = rhs`` over the unseeded vertices.

    Returns x with ``||lu x - rhs|| / max(||rhs||, 1) <= opts.tolerance``.
    Raises SolverFailureError (carrying the final residual) if the iteration
    budget runs out, and NotPositiveDefiniteError if the dense method finds
    the matrix indefinite.
    """
    opts = opts or SolveOptions()
    rhs = np.asarray(rhs, dtype=np.float64)
    n = lap.n_unseeded
    if rhs.shape != (n,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({n},)")
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    if not np.any(rhs):
        return np.zeros(n, dtype=np.float64)

    if opts.method == "dense":
        return _dense_cholesky(lap, rhs)

    a = lap.lu
    diag = a.diagonal()
    if diag.min() <= 0.0:
        raise NotPositiveDefiniteError(
            "system diagonal has a nonpositive entry; matrix cannot be positive definite"
        )
    tol_l2 = opts.tolerance * max(float(np.linalg.norm(rhs)), 1.0)
    tol_scaled = opts.tolerance
    budget = opts.max_iterations if opts.max_iterations is not None else 10 * n

    indptr = np.asarray(a.indptr, dtype=np.int64)
    indices = np.asarray(a.indices, dtype=np.int64)
    data = np.asarray(a.data, dtype=np.float64)

    # Defect-correction outer loop: re-solve on the true residual if the CG
    # recursion drifted, sharing one iteration budget.
    x = np.zeros(n, dtype=np.float64)
    used = 0
    resnorm = float(np.linalg.norm(rhs))
    for _ in range(_MAX_RESTARTS):
        r = rhs - a @ x
        resnorm = float(np.linalg.norm(r))
        scaled = float(np.abs(r / diag).max())
        if resnorm <= tol_l2 and scaled <= tol_scaled:
            return x
        if used >= budget:
            break
        d, iters, _, _, status = kernels.pcg_solve(
            indptr, indices, data, diag, r, tol_l2, tol_scaled, budget - used
        )
        used += max(int(iters), 1)
        x = x + d
        if status == kernels.BREAKDOWN:
            raise SolverFailureError(
                residual=float(np.linalg.norm(rhs - a @ x)) / max(float(np.linalg.norm(rhs)), 1.0),
                iterations=used,
                message="conjugate gradient hit nonpositive curvature; system may be indefinite",
            )
    r = rhs - a @ x
    resnorm = float(np.linalg.norm(r))
    if resnorm <= tol_l2 and float(np.abs(r / diag).max()) <= tol_scaled:
        return x
    raise SolverFailureError(
        residual=resnorm / max(float(np.linalg.norm(rhs)), 1.0), iterations=used
    )


def _dense_cholesky(lap: SparseLaplacian, rhs: np.ndarray) -> np.ndarray:
    a = lap.lu.toarray()
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


def dense_oracle_solve(lap: SparseLaplacian, rhs: np.ndarray) -> np.ndarray:
    """Brute-force solve by dense LU elimination with partial pivoting.

    Verification oracle only; refuses systems larger than
    ``DENSE_ORACLE_LIMIT`` unknowns.
    """
    n = lap.n_unseeded
    if n > DENSE_ORACLE_LIMIT:
        raise OracleTooLargeError(
            f"dense oracle limited to {DENSE_ORACLE_LIMIT} unknowns, got {n}"
        )
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape != (n,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({n},)")
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    try:
        return scipy.linalg.solve(lap.lu.toarray(), rhs, assume_a="gen")
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
