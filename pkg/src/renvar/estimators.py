"""Maximum-likelihood VAR estimators under four nested parameterizations.

All fits consume an AutocovarianceSet and share the centered-regressor
convention from renvar.moments, so the intercept estimate is always the
window mean of the targets.  The four model kinds:

* olsvar - unrestricted;
* rrvar  - rank(beta) = d, closed form through canonical correlations;
* evar   - beta and the error covariance share a u-dimensional reducing
           subspace of Sigma (basis optimized on the Grassmannian);
* revar  - both restrictions at once, rank d inside a u-plane.

revar with u = q collapses to rrvar, d = u to evar, d = u = q to olsvar;
the collapses are exact because the degenerate cases reuse the same
closed-form path with an identity basis.
"""

from dataclasses import dataclass

import numpy as np

from .envelope import (
    EnvelopeContext,
    OptimizerOptions,
    optimize_envelope_1d,
    optimize_envelope_fg,
    polish_fit,
)
from .exceptions import (
    BadDimsError,
    BadRankError,
    NotSemiorthogonalError,
    SingularMatrixError,
)
from .linalg import is_semiorthogonal, orthogonal_complement, sym_power, symmetrize
from .moments import canonical_correlations

LOG_2PI = float(np.log(2.0 * np.pi))

MODELS = ("olsvar", "rrvar", "evar", "revar")


@dataclass
class VarEstimate:
    """A fitted VAR with its factor decomposition where one exists."""

    model: str
    p: int
    q: int
    d: int
    u: int
    alpha: np.ndarray        # intercept of the centered-regressor form (= ybar)
    beta: np.ndarray         # q x qp
    sigma: np.ndarray        # q x q
    intercept: np.ndarray    # intercept in raw (uncentered) coordinates
    loglik: float
    nop: int
    nobs: int
    ybar: np.ndarray
    xbar: np.ndarray
    converged: bool = True
    objective: float | None = None
    phi: np.ndarray | None = None
    phi0: np.ndarray | None = None
    nu: np.ndarray | None = None
    bmat: np.ndarray | None = None
    omega: np.ndarray | None = None
    omega0: np.ndarray | None = None
    xi: np.ndarray | None = None


def nop_count(model, p, q, d=None, u=None):
    """Free parameters of each model, intercept excluded.

    The covariance contributes q(q+1)/2 in every case; envelope structure
    reshuffles rather than reduces it.
    """
    if p < 1 or q < 1:
        raise BadDimsError(f"need p >= 1 and q >= 1, got p={p}, q={q}")
    s = q * (q + 1) // 2
    if model == "olsvar":
        return q * q * p + s
    if model == "rrvar":
        if d is None or not 0 <= d <= q:
            raise BadDimsError(f"rrvar needs 0 <= d <= q, got d={d}")
        return d * (q * (p + 1) - d) + s
    if model == "evar":
        if u is None or not 0 <= u <= q:
            raise BadDimsError(f"evar needs 0 <= u <= q, got u={u}")
        return u * q * p + s
    if model == "revar":
        if d is None or u is None or not 0 <= d <= u <= q:
            raise BadDimsError(f"revar needs 0 <= d <= u <= q, got d={d}, u={u}")
        return d * (q * p + u - d) + s
    raise BadDimsError(f"unknown model {model!r}")


def loglik_from_moments(beta, sigma, acov):
    """Gaussian conditional log likelihood at (ybar, beta, sigma).

    Uses the moment identity for the residual covariance of the centered
    fit, S(beta) = G0 - beta G* - G*' beta' + beta Gp beta', so no pass
    over the raw data is needed.
    """
    t = acov.nobs
    q = acov.q
    cross = beta @ acov.gamma_star
    s_mat = acov.gamma0 - cross - cross.T + beta @ acov.gamma_p @ beta.T
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0:
        raise SingularMatrixError("sigma is not positive definite in loglik")
    quad = float(np.trace(np.linalg.solve(sigma, symmetrize(s_mat))))
    return -0.5 * t * (logdet + quad) - 0.5 * t * q * LOG_2PI


def conditional_loglik(estimate, design):
    """Log likelihood of an estimate on a (possibly different) design window."""
    x_raw = design.lagged + design.xbar
    resid = design.targets - estimate.intercept - x_raw @ estimate.beta.T
    t = design.nobs
    s_mat = resid.T @ resid / t
    sign, logdet = np.linalg.slogdet(estimate.sigma)
    if sign <= 0:
        raise SingularMatrixError("sigma is not positive definite in loglik")
    quad = float(np.trace(np.linalg.solve(estimate.sigma, s_mat)))
    return -0.5 * t * (logdet + quad) - 0.5 * t * design.nvar * LOG_2PI


def _finalize(model, acov, d, u, beta, sigma, converged=True, objective=None, **factors):
    beta = np.asarray(beta)
    sigma = symmetrize(sigma)
    return VarEstimate(
        model=model,
        p=acov.p,
        q=acov.q,
        d=d,
        u=u,
        alpha=acov.ybar.copy(),
        beta=beta,
        sigma=sigma,
        intercept=acov.ybar - beta @ acov.xbar,
        loglik=loglik_from_moments(beta, sigma, acov),
        nop=nop_count(model, acov.p, acov.q, d=d, u=u),
        nobs=acov.nobs,
        ybar=acov.ybar.copy(),
        xbar=acov.xbar.copy(),
        converged=converged,
        objective=objective,
        **factors,
    )


def fit_olsvar(acov):
    """Unrestricted least squares; also the Gaussian MLE."""
    beta = np.linalg.solve(acov.gamma_p, acov.gamma_star).T
    return _finalize("olsvar", acov, acov.q, acov.q, beta, acov.gamma_cond)


def _reduced_fit(acov, phi, d):
    """Rank-d regression of phi'y on x: the shared closed form.

    Returns (xi, beta, omega, nu, bmat): xi is the u x qp reduced-response
    coefficient, beta = phi xi its q x qp lift, omega the u x u residual
    covariance of phi'y.
    """
    u = phi.shape[1]
    g_red = symmetrize(phi.T @ acov.gamma0 @ phi)
    half = sym_power(g_red, 0.5)
    half_inv = sym_power(g_red, -0.5)
    gp_mh = sym_power(acov.gamma_p, -0.5)
    c_red = half_inv @ (acov.gamma_star @ phi).T @ gp_mh
    uu, ss, vvt = np.linalg.svd(c_red, full_matrices=False)
    ud = uu[:, :d]
    sd = ss[:d]
    c_d = (ud * sd) @ vvt[:d]
    xi = half @ c_d @ gp_mh
    beta = phi @ xi
    omega = symmetrize(half @ (np.eye(u) - (ud * sd**2) @ ud.T) @ half)
    nu = half @ ud * sd          # u x d; beta = phi nu bmat
    bmat = vvt[:d] @ gp_mh       # d x qp
    return xi, beta, omega, nu, bmat


def fit_rrvar(acov, d):
    """Reduced-rank VAR, rank(beta) = d; closed form, no optimization."""
    q = acov.q
    if not 1 <= d <= q:
        raise BadRankError(f"need 1 <= d <= q, got d={d}")
    xi, beta, omega, nu, bmat = _reduced_fit(acov, np.eye(q), d)
    return _finalize("rrvar", acov, d, q, beta, omega, nu=nu, bmat=bmat)


def fit_known_phi(acov, phi, d):
    """Rank-d fit with a known reducing-subspace basis (the closed form
    the envelope estimators apply at the optimized basis).

    Invariant to phi -> phi O for orthogonal O, since only span(phi)
    enters the likelihood.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    q = acov.q
    u = phi.shape[1]
    if phi.shape[0] != q:
        raise BadDimsError(f"phi must have {q} rows, got {phi.shape[0]}")
    if not 1 <= d <= u <= q:
        raise BadDimsError(f"need 1 <= d <= u <= q, got (d={d}, u={u}, q={q})")
    if not is_semiorthogonal(phi):
        raise NotSemiorthogonalError("phi'phi differs from identity beyond 1e-10")
    xi, beta, omega, nu, bmat = _reduced_fit(acov, phi, d)
    phi0 = orthogonal_complement(phi)
    if phi0.shape[1]:
        omega0 = symmetrize(phi0.T @ acov.gamma0 @ phi0)
        sigma = phi @ omega @ phi.T + phi0 @ omega0 @ phi0.T
    else:
        omega0 = np.zeros((0, 0))
        sigma = phi @ omega @ phi.T
    return _finalize(
        "revar", acov, d, u, beta, sigma,
        phi=phi, phi0=phi0, nu=nu, bmat=bmat, omega=omega, omega0=omega0, xi=xi,
    )


def fit_revar(acov, d, u, algorithm="auto", options=None):
    """Reduced-rank envelope VAR: optimize the basis, then apply the
    known-basis closed form.

    algorithm: 'fg' (full Grassmannian, multi-start), '1d' (sequential
    directions, optional fg polish), or 'auto' (fg when q <= 10, else 1d).
    """
    q = acov.q
    if not 1 <= d <= u <= q:
        raise BadDimsError(f"need 1 <= d <= u <= q, got (d={d}, u={u}, q={q})")
    opts = options or OptimizerOptions()
    if u == q:
        est = fit_known_phi(acov, np.eye(q), d)
        est.model = "revar"
        return est
    ctx = EnvelopeContext(acov, d)
    if algorithm == "auto":
        algorithm = "fg" if q <= 10 else "1d"
    if algorithm == "fg":
        env = optimize_envelope_fg(ctx, u, opts)
    elif algorithm == "1d":
        env = optimize_envelope_1d(ctx, u, opts)
        if opts.polish:
            env = polish_fit(ctx, u, env, opts)
    else:
        raise BadDimsError(f"unknown algorithm {algorithm!r}")
    est = fit_known_phi(acov, env.basis, d)
    est.model = "revar"
    est.converged = env.converged
    est.objective = env.value
    return est


def fit_evar(acov, u, algorithm="auto", options=None):
    """Envelope VAR: the d = u case of fit_revar."""
    est = fit_revar(acov, u, u, algorithm=algorithm, options=options)
    est.model = "evar"
    est.nop = nop_count("evar", acov.p, acov.q, u=u)
    return est


def fit_model(acov, model, d=None, u=None, algorithm="auto", options=None):
    """Dispatch by model name; d/u validated per model."""
    if model == "olsvar":
        return fit_olsvar(acov)
    if model == "rrvar":
        if d is None:
            raise BadDimsError("rrvar requires d")
        return fit_rrvar(acov, d)
    if model == "evar":
        if u is None:
            raise BadDimsError("evar requires u")
        return fit_evar(acov, u, algorithm=algorithm, options=options)
    if model == "revar":
        if d is None or u is None:
            raise BadDimsError("revar requires d and u")
        return fit_revar(acov, d, u, algorithm=algorithm, options=options)
    raise BadDimsError(f"unknown model {model!r}")
