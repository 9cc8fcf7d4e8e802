"""Numpy implementation of the envelope objective and its gradient.

Reference backend: the compiled kernel in _envelope_kernel.pyx must agree
with these routines to near machine precision (there is a parity test).
Inputs are the precomputed window moments; dmat is a semiorthogonal
(q x u) basis candidate and d <= u the regression rank.

The objective, minimized over the Grassmannian of u-planes, is

    F(D) = log det(D' Gc D) + log det(D' G0^{-1} D) + sum_{i=1}^{u-d} log w_i

with Gc the conditional covariance of y given x, G0 the marginal
covariance, and w_1 <= ... <= w_u the eigenvalues of the pencil
(D' G0 D) v = w (D' Gc D) v.  All pencil eigenvalues are >= 1 in exact
arithmetic; the sum takes the u-d smallest.  For d = u the sum is empty.
"""

import numpy as np
import scipy.linalg as sla

from .exceptions import DegenerateCandidateError


def _logdet_chol(m, label):
    try:
        c = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise DegenerateCandidateError(f"{label} not positive definite at candidate")
    return 2.0 * np.sum(np.log(np.diag(c)))


def objective_value(gamma0, gamma0_inv, gamma_cond, dmat, d):
    u = dmat.shape[1]
    gc = dmat.T @ gamma_cond @ dmat
    m2 = dmat.T @ gamma0_inv @ dmat
    val = _logdet_chol(gc, "D'GcD") + _logdet_chol(m2, "D'G0invD")
    m = u - d
    if m > 0:
        g0 = dmat.T @ gamma0 @ dmat
        try:
            w = sla.eigh(g0, gc, eigvals_only=True)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            raise DegenerateCandidateError("generalized eigenproblem failed at candidate")
        if w[0] <= 0.0:
            raise DegenerateCandidateError("nonpositive pencil eigenvalue at candidate")
        val += np.sum(np.log(w[:m]))
    return float(val)


def objective_grad(gamma0, gamma0_inv, gamma_cond, dmat, d):
    """Objective value, Euclidean gradient wrt the basis matrix, and the
    eigengap at the truncation boundary (inf when no boundary exists).

    The gradient of the eigenvalue sum uses first-order perturbation of
    the pencil with eigenvectors normalized v' (D'GcD) v = 1; it is valid
    whenever the kept and dropped eigenvalue groups do not touch, which
    the caller checks via the returned gap.
    """
    u = dmat.shape[1]
    m = u - d
    a_cond = gamma_cond @ dmat
    a_inv = gamma0_inv @ dmat
    gc = dmat.T @ a_cond
    m2 = dmat.T @ a_inv
    val = _logdet_chol(gc, "D'GcD") + _logdet_chol(m2, "D'G0invD")
    grad = a_cond @ np.linalg.inv(gc) + a_inv @ np.linalg.inv(m2)
    gap = np.inf
    if m > 0:
        a0 = gamma0 @ dmat
        g0 = dmat.T @ a0
        try:
            w, v = sla.eigh(g0, gc)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            raise DegenerateCandidateError("generalized eigenproblem failed at candidate")
        if w[0] <= 0.0:
            raise DegenerateCandidateError("nonpositive pencil eigenvalue at candidate")
        val += np.sum(np.log(w[:m]))
        if m < u:
            gap = float(w[m] - w[m - 1])
        vs = v[:, :m]
        grad += a0 @ (vs / w[:m]) @ vs.T - a_cond @ vs @ vs.T
    return float(val), 2.0 * grad, gap
