"""Dense symmetric-matrix helpers shared by the estimators.

Sizes here are small (q rarely above 40, qp a few hundred), so everything
uses eigendecompositions and explicit 0/1 index matrices rather than
anything clever.
"""

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    NotPSDError,
    RankDeficientError,
    SingularMatrixError,
)

# Relative tolerances for the PSD checks in sym_power.  NEG_TOL guards the
# "is it PSD at all" test, FLOOR_TOL is the clamp / singularity threshold.
NEG_TOL = 1e-10
FLOOR_TOL = 1e-12

kron = np.kron


def symmetrize(m):
    """Return 0.5*(M + M'), forcing exact symmetry."""
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def vec(m):
    """Stack columns of M into a vector (column-major)."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v, rows, cols):
    return np.asarray(v).reshape(rows, cols, order="F")


def sym_power(m, power):
    """Matrix power of a symmetric PSD matrix via eigendecomposition.

    Supports the powers the estimators need: 1/2, -1/2 and -1 (any real
    exponent works mechanically).  Eigenvalues below -NEG_TOL*||M||_2 raise
    NotPSDError.  For power 1/2 eigenvalues under FLOOR_TOL*||M||_2 are
    clamped to that floor; for negative powers they raise
    SingularMatrixError instead, since the inverse would be garbage.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"expected square matrix, got {m.shape}")
    w, v = np.linalg.eigh(symmetrize(m))
    scale = max(abs(w[0]), abs(w[-1]))
    if scale == 0.0:
        if power < 0:
            raise SingularMatrixError("zero matrix has no inverse power")
        return np.zeros_like(m)
    if w[0] < -NEG_TOL * scale:
        raise NotPSDError(f"min eigenvalue {w[0]:.3e} below tolerance for scale {scale:.3e}")
    floor = FLOOR_TOL * scale
    if power < 0 and w[0] <= floor:
        raise SingularMatrixError(
            f"eigenvalue {w[0]:.3e} under 1e-12 of scale {scale:.3e}; inverse power refused"
        )
    w = np.maximum(w, floor)
    out = (v * w**power) @ v.T
    return symmetrize(out)


def projection(x, v=None):
    """Projection onto span(X) in the V inner product.

    Returns (P, Q) with P = X (X'VX)^{-1} X'V and Q = I - P.  V=None means
    the identity.  Raises RankDeficientError when X'VX is not invertible
    at working precision.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] < x.shape[1]:
        raise DimensionMismatchError("projection target has more columns than rows")
    xv = x.T if v is None else x.T @ v
    gram = xv @ x
    gram = symmetrize(gram)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise RankDeficientError(f"gram matrix condition {cond:.3e}")
    p = x @ np.linalg.solve(gram, xv)
    q = np.eye(x.shape[0]) - p
    return p, q


def orthogonal_complement(phi):
    """Orthonormal basis of span(phi)^perp, deterministic for fixed input.

    Built from a column-pivoted QR of the complement projector so the
    result is a reproducible function of phi (no randomness, no LAPACK
    ambiguity beyond the fixed pivot order).
    """
    from scipy.linalg import qr

    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    q_dim, u = phi.shape
    if u >= q_dim:
        return np.zeros((q_dim, 0))
    perp = np.eye(q_dim) - phi @ phi.T
    qmat, _, _ = qr(perp, pivoting=True)
    return qmat[:, : q_dim - u]


def is_semiorthogonal(phi, tol=1e-10):
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    u = phi.shape[1]
    return bool(np.max(np.abs(phi.T @ phi - np.eye(u))) <= tol)


class VecVechKit:
    """Expansion/contraction matrices between vec and vech of q x q symmetrics.

    expansion (q^2 x q(q+1)/2) satisfies vec(S) = expansion @ vech(S) for
    symmetric S; contraction (q(q+1)/2 x q^2) picks the lower-triangle
    entries out of vec, so contraction @ expansion = I exactly.  Both are
    integer 0/1 arrays.  pinv is (E'E)^{-1} E'.
    """

    def __init__(self, q):
        if q < 1:
            raise DimensionMismatchError("q must be >= 1")
        self.q = q
        self.half = q * (q + 1) // 2
        expansion = np.zeros((q * q, self.half), dtype=np.int64)
        contraction = np.zeros((self.half, q * q), dtype=np.int64)
        # vech index of the (i, j) lower-triangle slot, column-major order
        pos = {}
        k = 0
        for j in range(q):
            for i in range(j, q):
                pos[(i, j)] = k
                contraction[k, j * q + i] = 1
                k += 1
        for j in range(q):
            for i in range(q):
                key = (i, j) if i >= j else (j, i)
                expansion[j * q + i, pos[key]] = 1
        self.expansion = expansion.astype(float)
        self.contraction = contraction.astype(float)
        ete = self.expansion.T @ self.expansion  # diagonal: 1 or 2 per slot
        self.pinv = np.diag(1.0 / np.diag(ete)) @ self.expansion.T

    def vech(self, m):
        m = np.asarray(m, dtype=float)
        if m.shape != (self.q, self.q):
            raise DimensionMismatchError(f"expected {(self.q, self.q)}, got {m.shape}")
        return self.contraction @ vec(m)

    def unvech(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.half,):
            raise DimensionMismatchError(f"expected length {self.half}, got {v.shape}")
        return unvec(self.expansion @ v, self.q, self.q)


def vech(m):
    """Half-vectorization (lower triangle, column-major)."""
    m = np.asarray(m)
    q = m.shape[0]
    return np.concatenate([m[j:, j] for j in range(q)])


def commutation_matrix(rows, cols):
    """K with K vec(A) = vec(A') for A of shape (rows, cols)."""
    k = np.zeros((rows * cols, rows * cols))
    for j in range(cols):
        for i in range(rows):
            k[i * cols + j, j * rows + i] = 1.0
    return k
