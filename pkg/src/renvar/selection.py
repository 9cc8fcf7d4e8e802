"""Order selection: lag length, regression rank, and envelope dimension.

Lag order runs on a common estimation window (targets aligned at p_max)
so the criteria compare likelihoods of the same observations.  The rank
test is the chi-squared statistic built from the standardized OLS
coefficient; envelope dimension search either walks a chi-squared
sequence or minimizes an information criterion at fixed rank.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .estimators import fit_olsvar, fit_revar, fit_rrvar, loglik_from_moments, nop_count
from .exceptions import BadDimsError, BadRankError, DegenerateCandidateError, TooShortError
from .linalg import sym_power, symmetrize
from .moments import LagDesign, TimeSeriesData, sample_autocovariances

CRITERIA = ("aic", "bic")


def _penalty(criterion, t):
    if criterion == "aic":
        return 2.0
    if criterion == "bic":
        return float(np.log(t))
    raise BadDimsError(f"unknown criterion {criterion!r}; want one of {CRITERIA}")


def _window_design(y, p, start):
    """LagDesign whose targets are rows start..T-1 (start >= p)."""
    t_all, q = y.shape
    targets = y[start:]
    t_eff = targets.shape[0]
    if t_eff <= q * p + 1:
        raise TooShortError(f"common window of {t_eff} rows too short for p={p}")
    lagged = np.empty((t_eff, q * p))
    for lag in range(1, p + 1):
        lagged[:, (lag - 1) * q : lag * q] = y[start - lag : t_all - lag]
    xbar = lagged.mean(axis=0)
    return LagDesign(p=p, targets=targets, lagged=lagged - xbar, ybar=targets.mean(axis=0), xbar=xbar)


@dataclass
class LagSelection:
    p_hat: int
    criterion: str
    p_grid: np.ndarray
    values: np.ndarray
    nobs: int


def select_lag(data, p_max, criterion="bic"):
    """Pick the lag order in 0..p_max minimizing
    log det(Sigma_hat(p)) + penalty(T) * NOP(p) / T on the common window.

    p = 0 is the intercept-only model.  Ties resolve to the smallest p.
    """
    if not isinstance(data, TimeSeriesData):
        data = TimeSeriesData(np.asarray(data))
    if p_max < 0:
        raise BadDimsError(f"p_max must be >= 0, got {p_max}")
    y = data.values
    t_all, q = y.shape
    start = max(p_max, 1)  # p = 0 evaluated on the same window
    keep = t_all - start
    if keep <= q * p_max + 1:
        raise TooShortError(f"series of {t_all} rows too short for p_max={p_max}")
    pen = _penalty(criterion, keep)
    values = np.empty(p_max + 1)
    for p in range(p_max + 1):
        if p == 0:
            yc = y[start:] - y[start:].mean(axis=0)
            sigma = yc.T @ yc / keep
            nop = q * (q + 1) // 2
        else:
            est = fit_olsvar(sample_autocovariances(_window_design(y, p, start)))
            sigma = est.sigma
            nop = nop_count("olsvar", p, q)
        sign, logdet = np.linalg.slogdet(sigma)
        if sign <= 0:
            raise BadDimsError(f"residual covariance not positive definite at p={p}")
        values[p] = logdet + pen * nop / keep
    p_hat = int(np.argmin(values))
    return LagSelection(p_hat, criterion, np.arange(p_max + 1), values, keep)


@dataclass
class RankTestResult:
    d0: int
    statistic: float
    dof: int
    pvalue: float


def rank_test(acov, d0):
    """Chi-squared test of H0: rank(beta) = d0 against larger rank.

    The statistic is T times the sum of the squared trailing singular
    values of the standardized coefficient
    sqrt((T-qp-1)/T) Gp^{1/2} beta_ols' Gc^{-1/2}, with
    (qp - d0)(q - d0) degrees of freedom.
    """
    q = acov.q
    qp = acov.gamma_p.shape[0]
    t = acov.nobs
    if not 0 <= d0 <= q - 1:
        raise BadRankError(f"d0 must be in [0, {q - 1}], got {d0}")
    if t <= qp + 1:
        raise TooShortError(f"rank test needs T > qp + 1 = {qp + 1}, have {t}")
    beta_ols = np.linalg.solve(acov.gamma_p, acov.gamma_star).T
    scale = np.sqrt((t - qp - 1) / t)
    std = scale * sym_power(acov.gamma_p, 0.5) @ beta_ols.T @ sym_power(acov.gamma_cond, -0.5)
    lam = np.linalg.svd(std, compute_uv=False)
    stat = t * float(np.sum(lam[d0:] ** 2))
    dof = (qp - d0) * (q - d0)
    return RankTestResult(d0, stat, dof, float(stats.chi2.sf(stat, dof)))


@dataclass
class RankSelection:
    d_hat: int
    alpha: float
    tests: list[RankTestResult] = field(default_factory=list)


def select_rank(acov, alpha=0.05):
    """Sequential rank search: the first d0 whose test is nonsignificant.

    Walks d0 = 0, 1, ... and stops at the first p-value above alpha;
    d_hat = q when every hypothesis is rejected.
    """
    tests = []
    for d0 in range(acov.q):
        res = rank_test(acov, d0)
        tests.append(res)
        if res.pvalue > alpha:
            return RankSelection(d0, alpha, tests)
    return RankSelection(acov.q, alpha, tests)


@dataclass
class DimSelection:
    d_hat: int
    u_hat: int
    mode: str
    table: list = field(default_factory=list)


def _revar_loglik(acov, d, u, algorithm, options):
    """Maximized log likelihood of the (d, u) cell; u = q is the rank-d fit."""
    if u == acov.q:
        return fit_rrvar(acov, d).loglik
    return fit_revar(acov, d, u, algorithm=algorithm, options=options).loglik


def select_dims(acov, mode="sequential", criterion="bic", alpha=0.05,
                u_method="chi2", algorithm="auto", options=None):
    """Choose the rank d and envelope dimension u.

    mode='grid' minimizes penalty*NOP - 2 loglik over the (0,0) cell and
    all 1 <= d <= u <= q (cells whose optimizer degenerates are skipped);
    ties go to the first minimum in (d, u) scan order.

    mode='sequential' picks d by the chi-squared rank walk, then u either
    by the chi-squared statistic 2(L(d,q) - L(d,u0)) on (q-u0)d degrees
    of freedom (u_method='chi2', first nonsignificant u0 wins, else q) or
    by the criterion over u in [d, q] at fixed d (u_method='ic').
    """
    q = acov.q
    t = acov.nobs
    if mode == "grid":
        pen = _penalty(criterion, t)
        null_ll = loglik_from_moments(np.zeros((q, acov.gamma_p.shape[0])), acov.gamma0, acov)
        table = [{"d": 0, "u": 0, "loglik": null_ll,
                  "ic": pen * (q * (q + 1) // 2) - 2.0 * null_ll}]
        for d in range(1, q + 1):
            for u in range(d, q + 1):
                try:
                    ll = _revar_loglik(acov, d, u, algorithm, options)
                except DegenerateCandidateError:
                    continue
                table.append({"d": d, "u": u, "loglik": ll,
                              "ic": pen * nop_count("revar", acov.p, q, d=d, u=u) - 2.0 * ll})
        best = min(table, key=lambda row: row["ic"])
        return DimSelection(best["d"], best["u"], "grid", table)

    if mode != "sequential":
        raise BadDimsError(f"unknown mode {mode!r}")
    d_hat = select_rank(acov, alpha).d_hat
    if d_hat == 0:
        return DimSelection(0, 0, "sequential", [])
    d_eff = min(d_hat, q)
    table = []
    if u_method == "chi2":
        ll_full = fit_rrvar(acov, d_eff).loglik
        for u0 in range(d_eff, q):
            ll_u = _revar_loglik(acov, d_eff, u0, algorithm, options)
            stat = max(2.0 * (ll_full - ll_u), 0.0)
            dof = (q - u0) * d_eff
            pval = float(stats.chi2.sf(stat, dof))
            table.append({"u": u0, "statistic": stat, "dof": dof, "pvalue": pval})
            if pval > alpha:
                return DimSelection(d_eff, u0, "sequential", table)
        return DimSelection(d_eff, q, "sequential", table)
    if u_method == "ic":
        pen = _penalty(criterion, t)
        for u0 in range(d_eff, q + 1):
            ll_u = _revar_loglik(acov, d_eff, u0, algorithm, options)
            ic = pen * nop_count("revar", acov.p, q, d=d_eff, u=u0) - 2.0 * ll_u
            table.append({"u": u0, "loglik": ll_u, "ic": ic})
        best = min(table, key=lambda row: row["ic"])
        return DimSelection(d_eff, best["u"], "sequential", table)
    raise BadDimsError(f"unknown u_method {u_method!r}")
