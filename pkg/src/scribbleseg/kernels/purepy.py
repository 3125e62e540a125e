"""Pure-Python (numpy/scipy) twin of the compiled solver kernel.

Same algorithm, same stopping rule and same status codes as
``scribbleseg.kernels._pcg`` so the two are interchangeable; the compiled
version only removes the per-iteration Python overhead.  Kept dependency-light
on purpose: a CSR triplet in, a solution out.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

BACKEND_NAME = "purepy"

# Status codes shared with the compiled kernel.
CONVERGED = 0
MAX_ITERATIONS = 1
BREAKDOWN = 2


def pcg_solve(indptr, indices, data, diag, b, tol_l2, tol_scaled, max_iterations):
    """Jacobi-preconditioned conjugate gradient from a zero initial guess.

    Converged means both residual criteria hold: the 2-norm of the residual
    is at most ``tol_l2`` (an absolute bound, the caller folds in any scaling)
    and max_i |r_i| / diag_i is at most ``tol_scaled``.  The second criterion
    makes every per-vertex averaging equation hold to ``tol_scaled`` even
    where degrees are tiny.

    Returns ``(x, iterations, resnorm, scaled_resnorm, status)`` with status
    one of CONVERGED, MAX_ITERATIONS, BREAKDOWN (nonpositive curvature, i.e.
    the matrix is not positive definite).
    """
    n = len(b)
    x = np.zeros(n, dtype=np.float64)
    if n == 0:
        return x, 0, 0.0, 0.0, CONVERGED
    a = sparse.csr_matrix((data, indices, indptr), shape=(n, n))
    inv_diag = 1.0 / diag

    r = b.astype(np.float64, copy=True)
    z = r * inv_diag
    p = z.copy()
    rz = float(r @ z)
    resnorm = float(np.linalg.norm(r))
    scaled = float(np.abs(z).max())
    if resnorm <= tol_l2 and scaled <= tol_scaled:
        return x, 0, resnorm, scaled, CONVERGED

    for k in range(1, int(max_iterations) + 1):
        ap = a @ p
        pap = float(p @ ap)
        if pap <= 0.0:
            return x, k, resnorm, scaled, BREAKDOWN
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        z = r * inv_diag
        resnorm = float(np.linalg.norm(r))
        scaled = float(np.abs(z).max())
        if resnorm <= tol_l2 and scaled <= tol_scaled:
            return x, k, resnorm, scaled, CONVERGED
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    return x, int(max_iterations), resnorm, scaled, MAX_ITERATIONS
