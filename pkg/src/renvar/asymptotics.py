"""Asymptotic covariances of the four estimators.

Everything is phrased through the estimating-vector h = (vec beta',
vech Sigma')' and the overparameterized-map framework: a model whose
parameter theta maps onto h has

    avar(sqrt(T) h_hat) = R (R' J R)^+ R',    R = dh/dtheta,

with J the Fisher information of h under Gaussian errors.  The gradient
matrices treat the orthogonal completion phi0 as fixed per evaluation;
finite-difference tests pin that convention.

For non-Gaussian errors the sandwich

    Z = R (R'JR)^+ R' J  Vtilde  J R (R'JR)^+ R'

replaces the plug-in, where Vtilde is the asymptotic covariance of the
unrestricted h (estimated from fourth-moment averages).  Vtilde = J^{-1}
recovers the Gaussian form identically.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import BadDimsError, DimensionMismatchError, ZeroSEError
from .linalg import VecVechKit, commutation_matrix, kron, projection, sym_power, symmetrize


def companion_matrix(beta):
    """Stack a q x qp coefficient into the qp x qp companion form."""
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    q, qp = beta.shape
    if qp % q:
        raise DimensionMismatchError(f"beta width {qp} not a multiple of q={q}")
    p = qp // q
    comp = np.zeros((qp, qp))
    comp[:q] = beta
    if p > 1:
        comp[q:, :-q] = np.eye(q * (p - 1))
    return comp


def population_gamma_p(beta, sigma, p):
    """Stationary covariance of the stacked regressor implied by (beta, Sigma)."""
    q = beta.shape[0]
    comp = companion_matrix(beta)
    if np.max(np.abs(np.linalg.eigvals(comp))) >= 1.0:
        raise BadDimsError("coefficient is not stationary; no stacked covariance")
    forcing = np.zeros((q * p, q * p))
    forcing[:q, :q] = sigma
    return symmetrize(sla.solve_discrete_lyapunov(comp, forcing))


@dataclass
class ParameterVectors:
    """Parameter point at which the avar formulas are evaluated.

    Carries every factorization the four models need; build it from a
    revar fit (or true parameters) so all formulas see one consistent
    point and the population efficiency ordering holds exactly.
    """

    gamma_p: np.ndarray
    sigma: np.ndarray
    beta: np.ndarray
    amat: np.ndarray       # q x d,  beta = amat bmat
    bmat: np.ndarray       # d x qp
    phi: np.ndarray        # q x u
    phi0: np.ndarray       # q x (q-u)
    nu: np.ndarray         # u x d
    omega: np.ndarray      # u x u
    omega0: np.ndarray     # (q-u) x (q-u)
    p: int
    q: int
    d: int
    u: int

    @property
    def xi(self):
        return self.nu @ self.bmat

    @classmethod
    def from_estimate(cls, est, gamma_p):
        """Assemble from a fitted revar estimate plus the sample stacked covariance."""
        if est.phi is None or est.nu is None:
            raise BadDimsError("estimate lacks envelope factors; fit revar first")
        return cls(
            gamma_p=np.asarray(gamma_p),
            sigma=est.sigma,
            beta=est.beta,
            amat=est.phi @ est.nu,
            bmat=est.bmat,
            phi=est.phi,
            phi0=est.phi0,
            nu=est.nu,
            omega=est.omega,
            omega0=est.omega0,
            p=est.p,
            q=est.q,
            d=est.d,
            u=est.u,
        )

    @classmethod
    def from_true(cls, params):
        """Assemble from simulate.TrueParameters, deriving the stacked covariance."""
        return cls(
            gamma_p=population_gamma_p(params.beta, params.sigma, params.p),
            sigma=params.sigma,
            beta=params.beta,
            amat=params.phi @ params.nu,
            bmat=params.bmat,
            phi=params.phi,
            phi0=params.phi0,
            nu=params.nu,
            omega=params.omega,
            omega0=params.omega0,
            p=params.p,
            q=params.q,
            d=params.d,
            u=params.u,
        )


@dataclass
class FisherInformation:
    """Block-diagonal information of h under Gaussian errors."""

    j_beta: np.ndarray
    j_sigma: np.ndarray
    jinv_beta: np.ndarray
    jinv_sigma: np.ndarray

    def full(self):
        return _blockdiag(self.j_beta, self.j_sigma)

    def full_inv(self):
        return _blockdiag(self.jinv_beta, self.jinv_sigma)


def _blockdiag(a, b):
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[: a.shape[0], : a.shape[1]] = a
    out[a.shape[0] :, a.shape[1] :] = b
    return out


def fisher_information(gamma_p, sigma):
    """J and J^{-1}; the vech block uses the expansion-matrix identities
    (2 E+ (S x S) E+')^{-1} = E' (S^{-1} x S^{-1}) E / 2."""
    q = sigma.shape[0]
    kit = VecVechKit(q)
    sigma_inv = sym_power(sigma, -1.0)
    gamma_p_inv = sym_power(gamma_p, -1.0)
    jinv_sigma = 2.0 * kit.pinv @ kron(sigma, sigma) @ kit.pinv.T
    j_sigma = 0.5 * kit.expansion.T @ kron(sigma_inv, sigma_inv) @ kit.expansion
    return FisherInformation(
        j_beta=kron(gamma_p, sigma_inv),
        j_sigma=symmetrize(j_sigma),
        jinv_beta=kron(gamma_p_inv, sigma),
        jinv_sigma=symmetrize(jinv_sigma),
    )


@dataclass
class GradientMatrices:
    """Jacobians of the parameterization maps onto h."""

    h: np.ndarray        # rank-d map psi = (vec A, vec B, vech Sigma)
    r: np.ndarray        # revar map theta = (vec Phi, vec nu, vec B, vech Om, vech Om0)
    d_evar: np.ndarray   # evar map delta = (vec Phi, vec xi, vech Om, vech Om0)


def gradient_matrices(pv):
    q, p, d, u = pv.q, pv.p, pv.d, pv.u
    qp = q * p
    s = q * (q + 1) // 2
    kit_q = VecVechKit(q)
    kit_u = VecVechKit(u)
    kit_u0 = VecVechKit(q - u) if q - u > 0 else None
    eye_q = np.eye(q)
    nbeta = q * qp

    # rank-d map
    h_beta = np.hstack([kron(pv.bmat.T, eye_q), kron(np.eye(qp), pv.amat)])
    h = _blockdiag(h_beta, np.eye(s))

    # shared vech(Sigma) derivative wrt vec(Phi), completion held fixed
    ksym = np.eye(q * q) + commutation_matrix(q, q)
    dsig_dphi = kit_q.contraction @ ksym @ kron(pv.phi @ pv.omega, eye_q)
    dsig_dom = kit_q.contraction @ kron(pv.phi, pv.phi) @ kit_u.expansion
    if kit_u0 is not None:
        dsig_dom0 = kit_q.contraction @ kron(pv.phi0, pv.phi0) @ kit_u0.expansion
    else:
        dsig_dom0 = np.zeros((s, 0))

    # revar map
    xi = pv.xi
    r_top = np.hstack([
        kron(xi.T, eye_q),                 # wrt vec Phi
        kron(pv.bmat.T, pv.phi),           # wrt vec nu
        kron(np.eye(qp), pv.phi @ pv.nu),  # wrt vec B
        np.zeros((nbeta, dsig_dom.shape[1])),
        np.zeros((nbeta, dsig_dom0.shape[1])),
    ])
    r_bot = np.hstack([
        dsig_dphi,
        np.zeros((s, u * d)),
        np.zeros((s, d * qp)),
        dsig_dom,
        dsig_dom0,
    ])
    r = np.vstack([r_top, r_bot])

    # evar map
    e_top = np.hstack([
        kron(xi.T, eye_q),
        kron(np.eye(qp), pv.phi),
        np.zeros((nbeta, dsig_dom.shape[1])),
        np.zeros((nbeta, dsig_dom0.shape[1])),
    ])
    e_bot = np.hstack([
        dsig_dphi,
        np.zeros((s, u * qp)),
        dsig_dom,
        dsig_dom0,
    ])
    d_evar = np.vstack([e_top, e_bot])
    return GradientMatrices(h=h, r=r, d_evar=d_evar)


@dataclass
class AsymptoticCovariance:
    """Full avar of sqrt(T) (h_hat - h); beta_block is the vec-beta corner."""

    model: str
    matrix: np.ndarray
    nbeta: int

    @property
    def beta_block(self):
        return self.matrix[: self.nbeta, : self.nbeta]

    def se_beta(self, t):
        return np.sqrt(np.maximum(np.diag(self.beta_block), 0.0) / t)


def _projected_avar(grad, info):
    j = info.full()
    middle = sla.pinvh(symmetrize(grad.T @ j @ grad))
    return symmetrize(grad @ middle @ grad.T)


def avar(model, pv, rrvar_method="closed"):
    """Asymptotic covariance of sqrt(T) h_hat for one model at a common point."""
    info = fisher_information(pv.gamma_p, pv.sigma)
    nbeta = pv.q * pv.q * pv.p
    if model == "olsvar":
        return AsymptoticCovariance(model, info.full_inv(), nbeta)
    grads = gradient_matrices(pv)
    if model == "rrvar":
        if rrvar_method == "closed":
            mat = info.full_inv().copy()
            mat[:nbeta, :nbeta] = _rrvar_beta_closed(pv)
            # vech block of the rank-d map is unrestricted, so only the
            # beta corner shrinks; cross blocks stay zero as in J^{-1}
            return AsymptoticCovariance(model, mat, nbeta)
        return AsymptoticCovariance(model, _projected_avar(grads.h, info), nbeta)
    if model == "evar":
        return AsymptoticCovariance(model, _projected_avar(grads.d_evar, info), nbeta)
    if model == "revar":
        return AsymptoticCovariance(model, _projected_avar(grads.r, info), nbeta)
    raise BadDimsError(f"unknown model {model!r}")


def _rrvar_beta_closed(pv):
    """Closed-form beta-corner of the rank-d avar:
    (I - Q_{B'(Gp)} x Q_{A(Sinv)}) (Gp^{-1} x Sigma)."""
    sigma_inv = sym_power(pv.sigma, -1.0)
    _, q_b = projection(pv.bmat.T, pv.gamma_p)
    _, q_a = projection(pv.amat, sigma_inv)
    base = kron(sym_power(pv.gamma_p, -1.0), pv.sigma)
    out = (np.eye(base.shape[0]) - kron(q_b, q_a)) @ base
    return symmetrize(out)


def avar_nonnormal(pv, vtilde):
    """Sandwich covariance of the revar estimator under non-Gaussian errors."""
    info = fisher_information(pv.gamma_p, pv.sigma)
    j = info.full()
    if vtilde.shape != j.shape:
        raise DimensionMismatchError(
            f"vtilde shape {vtilde.shape} does not match h dimension {j.shape}"
        )
    grads = gradient_matrices(pv)
    r = grads.r
    proj = r @ sla.pinvh(symmetrize(r.T @ j @ r)) @ r.T @ j
    mat = symmetrize(proj @ vtilde @ proj.T)
    nbeta = pv.q * pv.q * pv.p
    return AsymptoticCovariance("revar-sandwich", mat, nbeta)


def estimate_vtilde(estimate, design):
    """Fourth-moment plug-in for the asymptotic covariance of the
    unrestricted h_hat = (vec beta_ols', vech residual-cov')'.

    Rows of the influence sample: (Gp^{-1} x_t) x e_t kron-style for the
    coefficient part, vech(e_t e_t' - Sigma_hat) for the covariance part.
    """
    x = design.lagged
    t, qp = x.shape
    q = design.nvar
    x_raw = x + design.xbar
    resid = design.targets - estimate.intercept - x_raw @ estimate.beta.T
    gamma_p = x.T @ x / t
    px = np.linalg.solve(gamma_p, x.T).T          # rows Gp^{-1} x_t
    block_beta = np.einsum("tj,ti->tji", px, resid).reshape(t, qp * q)
    sigma_hat = resid.T @ resid / t
    # lower-triangle pairs in the same column-major order vech uses
    rows_i = np.concatenate([np.arange(j, q) for j in range(q)])
    rows_j = np.concatenate([np.full(q - j, j) for j in range(q)])
    block_sigma = resid[:, rows_i] * resid[:, rows_j] - sigma_hat[rows_i, rows_j]
    g = np.hstack([block_beta, block_sigma])
    return symmetrize(g.T @ g / t)


@dataclass
class SERatios:
    r_min: float
    r_max: float
    r_avg: float


def se_ratios(avar_model, avar_ref, t=1):
    """Coefficient-SE ratios of a model against the reference (revar).

    Ratios are scale-free in T, but t is accepted for symmetry with
    se_beta.  Raises ZeroSEError when the reference has a zero SE.
    """
    se_m = avar_model.se_beta(t)
    se_r = avar_ref.se_beta(t)
    if np.any(se_r <= 0.0):
        raise ZeroSEError("reference model has a zero standard error")
    ratios = se_m / se_r
    return SERatios(float(ratios.min()), float(ratios.max()), float(ratios.mean()))
