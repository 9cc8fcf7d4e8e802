"""Estimator tests against closed-form oracles and nesting identities."""

import numpy as np
import numpy.testing as npt
import pytest

from renvar import (
    MODELS,
    canonical_correlations,
    conditional_loglik,
    fit_evar,
    fit_known_phi,
    fit_model,
    fit_olsvar,
    fit_revar,
    fit_rrvar,
    loglik_from_moments,
    nop_count,
)
from renvar.exceptions import (
    BadDimsError,
    BadRankError,
    NotSemiorthogonalError,
    SingularMatrixError,
)
from renvar.linalg import sym_power


def test_ols_matches_lstsq_oracle(make_dataset):
    _, design, acov = make_dataset(d=2, u=3, p=2, q=4, t=500, seed=0)
    est = fit_olsvar(acov)
    yc = design.targets - design.ybar
    sol, *_ = np.linalg.lstsq(design.lagged, yc, rcond=None)
    npt.assert_allclose(est.beta, sol.T, atol=1e-10)
    npt.assert_allclose(est.sigma, acov.gamma_cond, atol=1e-12)
    npt.assert_allclose(est.alpha, design.ybar)
    npt.assert_allclose(est.intercept, est.ybar - est.beta @ est.xbar, atol=1e-12)
    assert est.d == est.u == acov.q
    assert est.phi is None


def test_rrvar_closed_form(make_dataset):
    _, _, acov = make_dataset(d=2, u=4, p=1, q=5, t=600, seed=1)
    d = 2
    est = fit_rrvar(acov, d)
    # beta through the canonical-correlation route, built independently
    dec = canonical_correlations(acov)
    g0_half = sym_power(acov.gamma0, 0.5)
    gp_mh = sym_power(acov.gamma_p, -0.5)
    cd = dec.truncated(d)
    npt.assert_allclose(est.beta, g0_half @ cd @ gp_mh, atol=1e-9)
    # sigma, two ways: the spectral form and the moment identity
    sigma_spec = g0_half @ (np.eye(5) - cd @ cd.T) @ g0_half
    npt.assert_allclose(est.sigma, sigma_spec, atol=1e-9)
    npt.assert_allclose(est.sigma, acov.gamma0 - est.beta @ acov.gamma_star, atol=1e-9)
    # the rank restriction binds
    s = np.linalg.svd(est.beta, compute_uv=False)
    assert s[d] < 1e-10 * s[0]
    npt.assert_allclose(est.beta, est.nu @ est.bmat, atol=1e-10)


def test_degenerate_cases_collapse(make_dataset):
    _, _, acov = make_dataset(d=2, u=3, p=1, q=4, t=400, seed=2)
    ols = fit_olsvar(acov)
    rr = fit_rrvar(acov, 2)

    full_rank_env = fit_revar(acov, 2, 4)
    npt.assert_allclose(full_rank_env.beta, rr.beta, atol=1e-10)
    npt.assert_allclose(full_rank_env.sigma, rr.sigma, atol=1e-10)
    npt.assert_allclose(full_rank_env.loglik, rr.loglik, atol=1e-8)

    env_full = fit_evar(acov, 4)
    npt.assert_allclose(env_full.beta, ols.beta, atol=1e-10)
    npt.assert_allclose(env_full.sigma, ols.sigma, atol=1e-10)

    everything = fit_revar(acov, 4, 4)
    npt.assert_allclose(everything.beta, ols.beta, atol=1e-10)
    npt.assert_allclose(everything.loglik, ols.loglik, atol=1e-8)


def test_known_phi_rotation_invariance(make_dataset, rng):
    _, _, acov = make_dataset(d=1, u=2, p=1, q=4, t=400, seed=3)
    phi, _ = np.linalg.qr(rng.standard_normal((4, 2)))
    o, _ = np.linalg.qr(rng.standard_normal((2, 2)))
    a = fit_known_phi(acov, phi, 1)
    b = fit_known_phi(acov, phi @ o, 1)
    npt.assert_allclose(a.beta, b.beta, atol=1e-10)
    npt.assert_allclose(a.sigma, b.sigma, atol=1e-10)
    npt.assert_allclose(a.loglik, b.loglik, atol=1e-8)
    with pytest.raises(NotSemiorthogonalError):
        fit_known_phi(acov, phi * 2.0, 1)


def test_envelope_factor_reconstruction(make_dataset):
    _, _, acov = make_dataset(d=1, u=2, p=1, q=5, t=700, seed=4)
    est = fit_revar(acov, 1, 2)
    assert est.phi.shape == (5, 2) and est.phi0.shape == (5, 3)
    npt.assert_allclose(
        est.sigma,
        est.phi @ est.omega @ est.phi.T + est.phi0 @ est.omega0 @ est.phi0.T,
        atol=1e-10,
    )
    npt.assert_allclose(est.beta, est.phi @ est.nu @ est.bmat, atol=1e-10)
    npt.assert_allclose(est.beta, est.phi @ est.xi, atol=1e-10)
    # beta lives inside span(phi)
    npt.assert_allclose(est.phi0.T @ est.beta, 0.0, atol=1e-9)


def test_loglik_ordering(make_dataset):
    _, _, acov = make_dataset(d=2, u=3, p=1, q=6, t=800, seed=5)
    ll = {m: fit_model(acov, m, d=2, u=3).loglik for m in MODELS}
    slack = 1e-8 * abs(ll["olsvar"])
    assert ll["olsvar"] >= ll["rrvar"] - slack
    assert ll["olsvar"] >= ll["evar"] - slack
    assert ll["rrvar"] >= ll["revar"] - slack
    assert ll["evar"] >= ll["revar"] - slack


def test_loglik_routes_agree(make_dataset):
    _, design, acov = make_dataset(d=2, u=3, p=2, q=3, t=300, seed=6)
    for model in MODELS:
        est = fit_model(acov, model, d=2, u=3)
        direct = conditional_loglik(est, design)
        npt.assert_allclose(est.loglik, direct, rtol=1e-9)


def test_loglik_rejects_indefinite_sigma(make_dataset):
    _, design, acov = make_dataset(d=1, u=1, p=1, q=2, t=100, seed=7)
    bad = np.array([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(SingularMatrixError):
        loglik_from_moments(np.zeros((2, 2)), bad, acov)
    est = fit_olsvar(acov)
    est.sigma = bad
    with pytest.raises(SingularMatrixError):
        conditional_loglik(est, design)


def test_nop_formulas():
    # hand counts for p=1, q=3, d=1, u=2
    s = 6
    assert nop_count("olsvar", 1, 3) == 9 + s
    assert nop_count("rrvar", 1, 3, d=1) == 1 * (3 * 2 - 1) + s
    assert nop_count("evar", 1, 3, u=2) == 2 * 3 + s
    assert nop_count("revar", 1, 3, d=1, u=2) == 1 * (3 + 2 - 1) + s
    # boundary collapse: all counts meet at d = u = q
    for p, q in ((1, 4), (3, 2)):
        full = nop_count("olsvar", p, q)
        assert nop_count("rrvar", p, q, d=q) == full
        assert nop_count("evar", p, q, u=q) == full
        assert nop_count("revar", p, q, d=q, u=q) == full
    with pytest.raises(BadDimsError):
        nop_count("rrvar", 1, 3, d=4)
    with pytest.raises(BadDimsError):
        nop_count("revar", 1, 3, d=2, u=1)
    with pytest.raises(BadDimsError):
        nop_count("spectral", 1, 3)


def test_dispatch_validation(make_dataset):
    _, _, acov = make_dataset(d=1, u=2, p=1, q=3, t=200, seed=8)
    with pytest.raises(BadDimsError):
        fit_model(acov, "rrvar")
    with pytest.raises(BadDimsError):
        fit_model(acov, "revar", d=1)
    with pytest.raises(BadDimsError):
        fit_model(acov, "var")
    with pytest.raises(BadRankError):
        fit_rrvar(acov, 0)
    with pytest.raises(BadDimsError):
        fit_revar(acov, 2, 1)


def test_fit_recovers_truth_at_scale(make_dataset):
    # consistency: errors shrink visibly between T=400 and T=6400
    errs = {}
    for t in (400, 6400):
        params, _, acov = make_dataset(d=2, u=3, p=1, q=5, t=t, seed=9)
        est = fit_revar(acov, 2, 3)
        errs[t] = np.linalg.norm(est.beta - params.beta)
    assert errs[6400] < 0.5 * errs[400]
