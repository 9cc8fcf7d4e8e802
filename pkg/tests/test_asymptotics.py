"""Asymptotic-covariance tests.

Jacobians are pinned by central finite differences of the raw maps (with
the orthogonal completion held fixed, matching the library convention),
the rank-restricted covariance by its two-Kronecker expansion, and the
fourth-moment plug-in by a fixed-design residual bootstrap.
"""

from dataclasses import replace

import numpy as np
import numpy.testing as npt
import pytest

from renvar import (
    ParameterVectors,
    avar,
    avar_nonnormal,
    companion_matrix,
    estimate_vtilde,
    fisher_information,
    fit_olsvar,
    fit_revar,
    gradient_matrices,
    population_gamma_p,
    se_ratios,
)
from renvar.asymptotics import _rrvar_beta_closed
from renvar.exceptions import BadDimsError, DimensionMismatchError, ZeroSEError
from renvar.linalg import VecVechKit, kron, projection, sym_power, vech


def _unvec(v, rows, cols):
    return np.asarray(v).reshape(rows, cols, order="F")


def _unvech(v, n):
    return _unvec(VecVechKit(n).expansion @ v, n, n)


def _fd_jacobian(fun, x0, h=1e-6):
    f0 = fun(x0)
    jac = np.empty((f0.size, x0.size))
    for k in range(x0.size):
        up = x0.copy()
        dn = x0.copy()
        up[k] += h
        dn[k] -= h
        jac[:, k] = (fun(up) - fun(dn)) / (2.0 * h)
    return jac


def test_companion_and_stacked_covariance(make_pv):
    beta = np.array([[0.5, 0.1, 0.2, 0.0], [0.0, 0.3, 0.0, 0.1]])
    comp = companion_matrix(beta)
    npt.assert_allclose(comp[:2], beta)
    npt.assert_allclose(comp[2:, :2], np.eye(2))
    npt.assert_allclose(comp[2:, 2:], 0.0)
    sigma = np.array([[1.0, 0.3], [0.3, 2.0]])
    gp = population_gamma_p(beta, sigma, 2)
    # fixed point of the stacked recursion
    forcing = np.zeros((4, 4))
    forcing[:2, :2] = sigma
    npt.assert_allclose(comp @ gp @ comp.T + forcing, gp, atol=1e-10)
    with pytest.raises(BadDimsError):
        population_gamma_p(np.eye(2) * 1.1, sigma, 1)
    with pytest.raises(DimensionMismatchError):
        companion_matrix(np.ones((2, 3)))


def test_fisher_blocks_invert(make_pv):
    pv = make_pv(d=1, u=2, p=1, q=3, seed=0)
    info = fisher_information(pv.gamma_p, pv.sigma)
    npt.assert_allclose(info.j_beta @ info.jinv_beta, np.eye(9), atol=1e-9)
    npt.assert_allclose(info.j_sigma @ info.jinv_sigma, np.eye(6), atol=1e-9)
    npt.assert_allclose(info.full() @ info.full_inv(), np.eye(15), atol=1e-9)


def test_rank_map_jacobian_fd(make_pv):
    pv = make_pv(d=1, u=2, p=1, q=4, seed=1)
    q, qp, d = pv.q, pv.q * pv.p, pv.d
    s = q * (q + 1) // 2
    na, nb = q * d, d * qp

    def h_of(psi):
        a = _unvec(psi[:na], q, d)
        b = _unvec(psi[na : na + nb], d, qp)
        sig = _unvech(psi[na + nb :], q)
        return np.concatenate([(a @ b).ravel(order="F"), vech(sig)])

    psi0 = np.concatenate(
        [pv.amat.ravel(order="F"), pv.bmat.ravel(order="F"), vech(pv.sigma)]
    )
    fd = _fd_jacobian(h_of, psi0)
    grads = gradient_matrices(pv)
    npt.assert_allclose(grads.h, fd, atol=1e-6)


def test_envelope_map_jacobians_fd(make_pv):
    pv = make_pv(d=1, u=2, p=1, q=4, seed=2)
    q, qp, d, u = pv.q, pv.q * pv.p, pv.d, pv.u
    nphi, nnu, nb = q * u, u * d, d * qp
    su, s0 = u * (u + 1) // 2, (q - u) * (q - u + 1) // 2
    phi0 = pv.phi0  # completion frozen at the evaluation point

    def sigma_of(phi, om, om0):
        return phi @ om @ phi.T + phi0 @ om0 @ phi0.T

    def h_revar(theta):
        k = 0
        phi = _unvec(theta[k : k + nphi], q, u); k += nphi
        nu = _unvec(theta[k : k + nnu], u, d); k += nnu
        b = _unvec(theta[k : k + nb], d, qp); k += nb
        om = _unvech(theta[k : k + su], u); k += su
        om0 = _unvech(theta[k:], q - u)
        beta = phi @ nu @ b
        return np.concatenate([beta.ravel(order="F"), vech(sigma_of(phi, om, om0))])

    def h_evar(delta):
        k = 0
        phi = _unvec(delta[k : k + nphi], q, u); k += nphi
        xi = _unvec(delta[k : k + u * qp], u, qp); k += u * qp
        om = _unvech(delta[k : k + su], u); k += su
        om0 = _unvech(delta[k:], q - u)
        return np.concatenate([(phi @ xi).ravel(order="F"), vech(sigma_of(phi, om, om0))])

    grads = gradient_matrices(pv)
    theta0 = np.concatenate([
        pv.phi.ravel(order="F"), pv.nu.ravel(order="F"), pv.bmat.ravel(order="F"),
        vech(pv.omega), vech(pv.omega0),
    ])
    npt.assert_allclose(grads.r, _fd_jacobian(h_revar, theta0), atol=1e-6)
    delta0 = np.concatenate([
        pv.phi.ravel(order="F"), pv.xi.ravel(order="F"),
        vech(pv.omega), vech(pv.omega0),
    ])
    npt.assert_allclose(grads.d_evar, _fd_jacobian(h_evar, delta0), atol=1e-6)


def test_rrvar_closed_form_equals_projected(make_pv):
    for seed in (3, 4):
        pv = make_pv(d=2, u=3, p=1, q=5, seed=seed)
        closed = avar("rrvar", pv, rrvar_method="closed")
        projected = avar("rrvar", pv, rrvar_method="mp")
        npt.assert_allclose(closed.matrix, projected.matrix, atol=1e-8)


def test_rrvar_two_kronecker_expansion(make_pv):
    pv = make_pv(d=2, u=4, p=2, q=4, seed=5)
    sigma_inv = sym_power(pv.sigma, -1.0)
    gp_inv = sym_power(pv.gamma_p, -1.0)
    p_b, q_b = projection(pv.bmat.T, pv.gamma_p)
    p_a, _ = projection(pv.amat, sigma_inv)
    expanded = kron(q_b @ gp_inv, p_a @ pv.sigma) + kron(p_b @ gp_inv, pv.sigma)
    npt.assert_allclose(_rrvar_beta_closed(pv), expanded, atol=1e-8)


def test_efficiency_orderings_psd(make_pv):
    def eigmin(m):
        return float(np.linalg.eigvalsh((m + m.T) / 2.0)[0])

    for seed, dims in ((6, (1, 2, 1, 4)), (7, (2, 3, 1, 5)), (8, (2, 4, 2, 5))):
        d, u, p, q = dims
        pv = make_pv(d=d, u=u, p=p, q=q, seed=seed)
        mats = {m: avar(m, pv).matrix for m in ("olsvar", "evar", "revar")}
        mats["rrvar"] = avar("rrvar", pv, rrvar_method="mp").matrix
        for hi, lo in (
            ("olsvar", "rrvar"), ("rrvar", "revar"),
            ("olsvar", "evar"), ("evar", "revar"),
        ):
            assert eigmin(mats[hi] - mats[lo]) >= -1e-8, (seed, hi, lo)


def test_rrvar_avar_invariant_to_factor_rescaling(make_pv, rng):
    pv = make_pv(d=2, u=3, p=1, q=4, seed=9)
    c = rng.standard_normal((2, 2)) + 2.0 * np.eye(2)
    other = replace(pv, amat=pv.amat @ c, bmat=np.linalg.solve(c, pv.bmat))
    npt.assert_allclose(other.amat @ other.bmat, pv.beta, atol=1e-12)
    npt.assert_allclose(
        _rrvar_beta_closed(other), _rrvar_beta_closed(pv), atol=1e-9
    )


def test_sandwich_collapses_to_plugin(make_pv):
    pv = make_pv(d=1, u=2, p=1, q=4, seed=10)
    info = fisher_information(pv.gamma_p, pv.sigma)
    plug = avar("revar", pv)
    sand = avar_nonnormal(pv, info.full_inv())
    npt.assert_allclose(sand.matrix, plug.matrix, atol=1e-8)
    with pytest.raises(DimensionMismatchError):
        avar_nonnormal(pv, np.eye(3))


def test_saturated_point_gives_ols_everywhere(make_pv):
    pv = make_pv(d=3, u=3, p=1, q=3, seed=11)
    base = kron(sym_power(pv.gamma_p, -1.0), pv.sigma)
    for model in ("olsvar", "rrvar", "evar", "revar"):
        npt.assert_allclose(avar(model, pv).beta_block, base, atol=1e-8)
    with pytest.raises(BadDimsError):
        avar("garch", pv)


def test_vtilde_near_fisher_under_normality(make_dataset):
    _, design, acov = make_dataset(d=1, u=2, p=1, q=2, t=20000, seed=12)
    est = fit_olsvar(acov)
    vt = estimate_vtilde(est, design)
    info = fisher_information(acov.gamma_p, est.sigma)
    ref = info.full_inv()
    ratio = np.diag(vt) / np.diag(ref)
    assert np.all(ratio > 0.85) and np.all(ratio < 1.15)


def test_vtilde_matches_fixed_design_bootstrap(make_dataset):
    # heavy-tailed errors: the vech block must leave the Gaussian value,
    # and the bootstrap must follow it
    _, design, acov = make_dataset(d=1, u=2, p=1, q=2, t=4000, seed=13, family="chi2_6")
    est = fit_olsvar(acov)
    vt = estimate_vtilde(est, design)
    x = design.lagged
    t = design.nobs
    yc = design.targets - design.ybar
    resid = yc - x @ est.beta.T
    gp = x.T @ x / t
    rng = np.random.default_rng(99)
    n_boot = 600
    draws = np.empty((n_boot, vt.shape[0]))
    for b in range(n_boot):
        e = resid[rng.integers(0, t, t)]
        e = e - e.mean(axis=0)
        yb = x @ est.beta.T + e
        bb = np.linalg.solve(gp, x.T @ yb / t).T
        rb = yb - x @ bb.T
        sig_b = rb.T @ rb / t
        draws[b] = np.sqrt(t) * np.concatenate(
            [(bb - est.beta).ravel(order="F"), vech(sig_b - est.sigma)]
        )
    cov_boot = draws.T @ draws / n_boot
    ratio = np.diag(cov_boot) / np.diag(vt)
    assert np.all(ratio > 0.7) and np.all(ratio < 1.3)
    # and the sandwich built from it stays a covariance
    rev = fit_revar(acov, 1, 2)
    pv_est = ParameterVectors.from_estimate(rev, acov.gamma_p)
    sand = avar_nonnormal(pv_est, vt)
    npt.assert_allclose(sand.matrix, sand.matrix.T, atol=1e-10)
    assert np.linalg.eigvalsh(sand.matrix)[0] >= -1e-8


def test_se_ratios_basics(make_pv):
    pv = make_pv(d=1, u=2, p=1, q=3, seed=14)
    ref = avar("revar", pv)
    same = se_ratios(ref, ref)
    npt.assert_allclose((same.r_min, same.r_max, same.r_avg), (1.0, 1.0, 1.0))
    ols = avar("olsvar", pv)
    rat = se_ratios(ols, ref)
    assert rat.r_min >= 1.0 - 1e-9
    assert rat.r_max >= rat.r_avg >= rat.r_min
    zero = avar("revar", pv)
    zero.matrix = np.zeros_like(zero.matrix)
    with pytest.raises(ZeroSEError):
        se_ratios(ols, zero)
