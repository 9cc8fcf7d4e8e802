"""Order-selection tests: lag criteria, rank walk, dimension search."""

import numpy as np
import numpy.testing as npt
import pytest
from scipy import stats

from renvar import (
    build_lag_design,
    rank_test,
    sample_autocovariances,
    select_dims,
    select_lag,
    select_rank,
)
from renvar.exceptions import BadDimsError, BadRankError, TooShortError
from renvar.linalg import sym_power
from renvar.selection import _revar_loglik
from renvar.simulate import generate_true_parameters, simulate_var


def _acov(d, u, p, q, t, seed):
    params = generate_true_parameters(d, u, p, q, seed=seed)
    data, presample = simulate_var(params, t, "normal", seed=seed + 500)
    return sample_autocovariances(build_lag_design(data, p, presample=presample))


def test_lag_recovery_var1():
    hits = 0
    for rep in range(20):
        params = generate_true_parameters(2, 3, 1, 5, seed=rep)
        data, _ = simulate_var(params, 1000, "normal", seed=rep + 100)
        sel = select_lag(data, p_max=3)
        hits += sel.p_hat == 1
        assert sel.values.shape == (4,)
        assert sel.nobs == 1000 - 3
    assert hits >= 18


def test_lag_zero_for_white_noise():
    hits = 0
    for rep in range(20):
        rng = np.random.default_rng(rep)
        data = rng.standard_normal((1000, 4))
        hits += select_lag(data, p_max=2).p_hat == 0
    assert hits >= 18


def test_lag_criterion_values_recomputable():
    # the reported p = 0 value is logdet of the window covariance plus penalty
    rng = np.random.default_rng(3)
    y = rng.standard_normal((200, 2))
    sel = select_lag(y, p_max=2, criterion="aic")
    window = y[2:]
    yc = window - window.mean(axis=0)
    sigma = yc.T @ yc / len(window)
    want = np.linalg.slogdet(sigma)[1] + 2.0 * 3 / len(window)
    npt.assert_allclose(sel.values[0], want, rtol=1e-12)


def test_rank_test_statistic_recomputed():
    acov = _acov(d=2, u=3, p=1, q=4, t=800, seed=0)
    res = rank_test(acov, 1)
    t = acov.nobs
    qp = acov.gamma_p.shape[0]
    beta_ols = np.linalg.solve(acov.gamma_p, acov.gamma_star).T
    std = (
        np.sqrt((t - qp - 1) / t)
        * sym_power(acov.gamma_p, 0.5)
        @ beta_ols.T
        @ sym_power(acov.gamma_cond, -0.5)
    )
    lam = np.linalg.svd(std, compute_uv=False)
    npt.assert_allclose(res.statistic, t * np.sum(lam[1:] ** 2), rtol=1e-10)
    assert res.dof == (qp - 1) * (4 - 1)
    npt.assert_allclose(res.pvalue, stats.chi2.sf(res.statistic, res.dof), rtol=1e-12)


def test_rank_test_rotation_invariant(rng):
    acov_a = _acov(d=1, u=2, p=1, q=3, t=500, seed=1)
    params = generate_true_parameters(1, 2, 1, 3, seed=1)
    data, presample = simulate_var(params, 500, "normal", seed=501)
    o, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    rotated = build_lag_design(data.values @ o, 1, presample=presample @ o)
    acov_b = sample_autocovariances(rotated)
    for d0 in (0, 1, 2):
        a = rank_test(acov_a, d0)
        b = rank_test(acov_b, d0)
        npt.assert_allclose(a.statistic, b.statistic, rtol=1e-8)


def test_rank_walk_recovers_truth():
    acov = _acov(d=2, u=4, p=1, q=5, t=2000, seed=2)
    sel = select_rank(acov, alpha=0.05)
    assert sel.d_hat == 2
    # every rejected hypothesis below d_hat, one acceptance at d_hat
    assert [r.d0 for r in sel.tests] == [0, 1, 2]
    assert sel.tests[-1].pvalue > 0.05
    assert all(r.pvalue <= 0.05 for r in sel.tests[:-1])


def test_loglik_nondecreasing_in_u():
    acov = _acov(d=1, u=2, p=1, q=5, t=600, seed=3)
    lls = [_revar_loglik(acov, 1, u, "auto", None) for u in range(1, 6)]
    assert all(b >= a - 1e-7 for a, b in zip(lls, lls[1:]))


def test_dim_selection_modes_agree_at_scale():
    acov = _acov(d=2, u=3, p=1, q=5, t=4000, seed=4)
    grid = select_dims(acov, mode="grid")
    seq_chi = select_dims(acov, mode="sequential", u_method="chi2")
    seq_ic = select_dims(acov, mode="sequential", u_method="ic")
    assert (grid.d_hat, grid.u_hat) == (2, 3)
    assert (seq_chi.d_hat, seq_chi.u_hat) == (2, 3)
    assert (seq_ic.d_hat, seq_ic.u_hat) == (2, 3)
    assert grid.mode == "grid" and seq_ic.mode == "sequential"
    assert all(row["d"] <= row["u"] for row in grid.table if row["d"] > 0)


def test_dim_selection_white_noise_collapses():
    rng = np.random.default_rng(5)
    acov = sample_autocovariances(build_lag_design(rng.standard_normal((1500, 3)), 1))
    sel = select_dims(acov, mode="sequential")
    assert (sel.d_hat, sel.u_hat) == (0, 0)
    assert sel.table == []


def test_validation_errors():
    acov = _acov(d=1, u=2, p=1, q=3, t=300, seed=6)
    with pytest.raises(BadRankError):
        rank_test(acov, 3)
    with pytest.raises(BadRankError):
        rank_test(acov, -1)
    with pytest.raises(BadDimsError):
        select_dims(acov, mode="exhaustive")
    with pytest.raises(BadDimsError):
        select_dims(acov, mode="sequential", u_method="cv")
    with pytest.raises(BadDimsError):
        select_lag(np.zeros((50, 2)) + np.random.default_rng(0).standard_normal((50, 2)), p_max=-1)
    with pytest.raises(TooShortError):
        select_lag(np.random.default_rng(0).standard_normal((8, 2)), p_max=3)
