# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled envelope-objective kernel.

Mirrors renvar._objective_py exactly (see that module for the formulas
and conventions); a parity test holds the two backends together.  All
matrix arguments must be float64 and Fortran-ordered.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, log
from scipy.linalg.cython_blas cimport dgemm
from scipy.linalg.cython_lapack cimport dpotrf, dpotri, dsygvd

from .exceptions import DegenerateCandidateError

cnp.import_array()


def backend_name():
    return "cython"


cdef inline double _logdet_tri(double[::1, :] a, int n) nogil:
    # a holds a Cholesky factor; log det of the factored matrix
    cdef double acc = 0.0
    cdef int i
    for i in range(n):
        acc += log(a[i, i])
    return 2.0 * acc


cdef int _potrf_lower(double[::1, :] a, int n) nogil:
    cdef int info = 0
    dpotrf("L", &n, &a[0, 0], &n, &info)
    return info


cdef void _symmetrize_from_lower(double[::1, :] a, int n) nogil:
    cdef int i, j
    for j in range(n):
        for i in range(j):
            a[i, j] = a[j, i]


def objective_value(double[::1, :] g0, double[::1, :] g0inv,
                    double[::1, :] gc, double[::1, :] dmat, int d):
    cdef int q = dmat.shape[0]
    cdef int u = dmat.shape[1]
    cdef int m = u - d
    cdef int info = 0, itype = 1, i
    cdef int lwork = 1 + 6 * u + 2 * u * u
    cdef int liwork = 3 + 5 * u
    cdef double one = 1.0, zero = 0.0
    cdef double val = 0.0
    cdef double[::1, :] tmp = np.empty((q, u), order="F")
    cdef double[::1, :] small = np.empty((u, u), order="F")
    cdef double[::1, :] fac = np.empty((u, u), order="F")
    cdef double[::1, :] g0u = np.empty((u, u), order="F")
    cdef double[::1] w = np.empty(u)
    cdef double[::1] work = np.empty(lwork)
    cdef int[::1] iwork = np.empty(liwork, dtype=np.intc)

    # D' Gc D
    dgemm("N", "N", &q, &u, &q, &one, &gc[0, 0], &q, &dmat[0, 0], &q, &zero, &tmp[0, 0], &q)
    dgemm("T", "N", &u, &u, &q, &one, &dmat[0, 0], &q, &tmp[0, 0], &q, &zero, &small[0, 0], &u)
    fac[:, :] = small
    if _potrf_lower(fac, u) != 0:
        raise DegenerateCandidateError("D'GcD not positive definite at candidate")
    val += _logdet_tri(fac, u)

    if m > 0:
        # pencil (D'G0D) v = w (D'GcD) v; small still holds D'GcD
        dgemm("N", "N", &q, &u, &q, &one, &g0[0, 0], &q, &dmat[0, 0], &q, &zero, &tmp[0, 0], &q)
        dgemm("T", "N", &u, &u, &q, &one, &dmat[0, 0], &q, &tmp[0, 0], &q, &zero, &g0u[0, 0], &u)
        fac[:, :] = small
        dsygvd(&itype, "N", "L", &u, &g0u[0, 0], &u, &fac[0, 0], &u,
               &w[0], &work[0], &lwork, &iwork[0], &liwork, &info)
        if info != 0:
            raise DegenerateCandidateError("generalized eigenproblem failed at candidate")
        if w[0] <= 0.0:
            raise DegenerateCandidateError("nonpositive pencil eigenvalue at candidate")
        for i in range(m):
            val += log(w[i])

    # D' G0^{-1} D
    dgemm("N", "N", &q, &u, &q, &one, &g0inv[0, 0], &q, &dmat[0, 0], &q, &zero, &tmp[0, 0], &q)
    dgemm("T", "N", &u, &u, &q, &one, &dmat[0, 0], &q, &tmp[0, 0], &q, &zero, &small[0, 0], &u)
    if _potrf_lower(small, u) != 0:
        raise DegenerateCandidateError("D'G0invD not positive definite at candidate")
    val += _logdet_tri(small, u)
    return val


def objective_grad(double[::1, :] g0, double[::1, :] g0inv,
                   double[::1, :] gc, double[::1, :] dmat, int d,
                   double[::1, :] grad):
    """Write the Euclidean gradient into `grad`; return (value, gap)."""
    cdef int q = dmat.shape[0]
    cdef int u = dmat.shape[1]
    cdef int m = u - d
    cdef int info = 0, itype = 1, i, j
    cdef int lwork = 1 + 6 * u + 2 * u * u
    cdef int liwork = 3 + 5 * u
    cdef double one = 1.0, zero = 0.0, two = 2.0, mtwo = -2.0
    cdef double val = 0.0, gap = INFINITY
    cdef double[::1, :] a_cond = np.empty((q, u), order="F")
    cdef double[::1, :] a_inv = np.empty((q, u), order="F")
    cdef double[::1, :] a0 = np.empty((q, u), order="F")
    cdef double[::1, :] gcu = np.empty((u, u), order="F")
    cdef double[::1, :] work_u = np.empty((u, u), order="F")
    cdef double[::1, :] g0u = np.empty((u, u), order="F")
    cdef double[::1, :] bmat = np.empty((u, u), order="F")
    cdef double[::1, :] smat = np.empty((u, u), order="F")
    cdef double[::1, :] scaled
    cdef double[::1] w = np.empty(u)
    cdef double[::1] work = np.empty(lwork)
    cdef int[::1] iwork = np.empty(liwork, dtype=np.intc)

    dgemm("N", "N", &q, &u, &q, &one, &gc[0, 0], &q, &dmat[0, 0], &q, &zero, &a_cond[0, 0], &q)
    dgemm("T", "N", &u, &u, &q, &one, &dmat[0, 0], &q, &a_cond[0, 0], &q, &zero, &gcu[0, 0], &u)
    work_u[:, :] = gcu
    if _potrf_lower(work_u, u) != 0:
        raise DegenerateCandidateError("D'GcD not positive definite at candidate")
    val += _logdet_tri(work_u, u)
    dpotri("L", &u, &work_u[0, 0], &u, &info)
    if info != 0:
        raise DegenerateCandidateError("inverse of D'GcD failed")
    _symmetrize_from_lower(work_u, u)
    # grad = 2 a_cond inv(D'GcD)
    dgemm("N", "N", &q, &u, &u, &two, &a_cond[0, 0], &q, &work_u[0, 0], &u, &zero, &grad[0, 0], &q)

    dgemm("N", "N", &q, &u, &q, &one, &g0inv[0, 0], &q, &dmat[0, 0], &q, &zero, &a_inv[0, 0], &q)
    dgemm("T", "N", &u, &u, &q, &one, &dmat[0, 0], &q, &a_inv[0, 0], &q, &zero, &work_u[0, 0], &u)
    if _potrf_lower(work_u, u) != 0:
        raise DegenerateCandidateError("D'G0invD not positive definite at candidate")
    val += _logdet_tri(work_u, u)
    dpotri("L", &u, &work_u[0, 0], &u, &info)
    if info != 0:
        raise DegenerateCandidateError("inverse of D'G0invD failed")
    _symmetrize_from_lower(work_u, u)
    dgemm("N", "N", &q, &u, &u, &two, &a_inv[0, 0], &q, &work_u[0, 0], &u, &one, &grad[0, 0], &q)

    if m > 0:
        dgemm("N", "N", &q, &u, &q, &one, &g0[0, 0], &q, &dmat[0, 0], &q, &zero, &a0[0, 0], &q)
        dgemm("T", "N", &u, &u, &q, &one, &dmat[0, 0], &q, &a0[0, 0], &q, &zero, &g0u[0, 0], &u)
        bmat[:, :] = gcu
        # eigenvectors land in g0u, normalized v' (D'GcD) v = I
        dsygvd(&itype, "V", "L", &u, &g0u[0, 0], &u, &bmat[0, 0], &u,
               &w[0], &work[0], &lwork, &iwork[0], &liwork, &info)
        if info != 0:
            raise DegenerateCandidateError("generalized eigenproblem failed at candidate")
        if w[0] <= 0.0:
            raise DegenerateCandidateError("nonpositive pencil eigenvalue at candidate")
        for i in range(m):
            val += log(w[i])
        if m < u:
            gap = w[m] - w[m - 1]
        scaled = np.empty((u, m), order="F")
        for j in range(m):
            for i in range(u):
                scaled[i, j] = g0u[i, j] / w[j]
        # grad += 2 a0 (Vs/w) Vs'  -  2 a_cond Vs Vs'
        dgemm("N", "T", &u, &u, &m, &one, &scaled[0, 0], &u, &g0u[0, 0], &u, &zero, &smat[0, 0], &u)
        dgemm("N", "N", &q, &u, &u, &two, &a0[0, 0], &q, &smat[0, 0], &u, &one, &grad[0, 0], &q)
        dgemm("N", "T", &u, &u, &m, &one, &g0u[0, 0], &u, &g0u[0, 0], &u, &zero, &smat[0, 0], &u)
        dgemm("N", "N", &q, &u, &u, &mtwo, &a_cond[0, 0], &q, &smat[0, 0], &u, &one, &grad[0, 0], &q)

    return val, gap
