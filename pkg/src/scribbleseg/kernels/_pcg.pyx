# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled solver kernel: Jacobi-preconditioned CG over a CSR matrix.

Twin of ``scribbleseg.kernels.purepy`` -- same stopping rule, same status
codes -- with the matvec and vector updates fused into C loops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

BACKEND_NAME = "compiled"

CONVERGED = 0
MAX_ITERATIONS = 1
BREAKDOWN = 2


cdef inline void _csr_matvec(const long[::1] indptr, const long[::1] indices,
                             const double[::1] data, const double[::1] x,
                             double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(indptr.shape[0] - 1):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        out[i] = acc


def pcg_solve(indptr, indices, data, diag, b, double tol_l2, double tol_scaled,
              long max_iterations):
    """See ``scribbleseg.kernels.purepy.pcg_solve``; identical contract."""
    cdef cnp.ndarray[double, ndim=1] x_arr = np.zeros(len(b), dtype=np.float64)
    cdef Py_ssize_t n = x_arr.shape[0]
    if n == 0:
        return x_arr, 0, 0.0, 0.0, CONVERGED

    cdef const long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[::1] a = np.ascontiguousarray(data, dtype=np.float64)
    cdef const double[::1] d = np.ascontiguousarray(diag, dtype=np.float64)

    cdef double[::1] x = x_arr
    cdef double[::1] r = np.array(b, dtype=np.float64, copy=True)
    cdef double[::1] z = np.empty(n, dtype=np.float64)
    cdef double[::1] p = np.empty(n, dtype=np.float64)
    cdef double[::1] ap = np.empty(n, dtype=np.float64)

    cdef double rz = 0.0, rr = 0.0, scaled = 0.0, pap, alpha, beta, rz_new
    cdef double resnorm
    cdef Py_ssize_t i
    cdef long k

    with nogil:
        for i in range(n):
            z[i] = r[i] / d[i]
            p[i] = z[i]
            rz += r[i] * z[i]
            rr += r[i] * r[i]
            if fabs(z[i]) > scaled:
                scaled = fabs(z[i])
    resnorm = sqrt(rr)
    if resnorm <= tol_l2 and scaled <= tol_scaled:
        return x_arr, 0, resnorm, scaled, CONVERGED

    for k in range(1, max_iterations + 1):
        with nogil:
            _csr_matvec(ip, ix, a, p, ap)
            pap = 0.0
            for i in range(n):
                pap += p[i] * ap[i]
        if pap <= 0.0:
            return x_arr, k, resnorm, scaled, BREAKDOWN
        with nogil:
            alpha = rz / pap
            rz_new = 0.0
            rr = 0.0
            scaled = 0.0
            for i in range(n):
                x[i] += alpha * p[i]
                r[i] -= alpha * ap[i]
                z[i] = r[i] / d[i]
                rz_new += r[i] * z[i]
                rr += r[i] * r[i]
                if fabs(z[i]) > scaled:
                    scaled = fabs(z[i])
        resnorm = sqrt(rr)
        if resnorm <= tol_l2 and scaled <= tol_scaled:
            return x_arr, k, resnorm, scaled, CONVERGED
        beta = rz_new / rz
        rz = rz_new
        with nogil:
            for i in range(n):
                p[i] = z[i] + beta * p[i]

    return x_arr, max_iterations, resnorm, scaled, MAX_ITERATIONS
