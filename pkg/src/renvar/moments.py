"""Sample second moments for lagged vector series.

Conventions used throughout the package:

* the stacked regressor at time t is x_t = (y'_{t-1}, ..., y'_{t-p})',
  so a VAR(p) reads y_t = alpha + beta x_t + eps_t with beta (q x qp);
* moments are taken over the design window with divisor T (the number of
  usable observations), lagged block centered so x-bar = 0;
* gamma_star stores (1/T) sum x_t (y_t - ybar)', shape (qp, q).
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    BadRankError,
    DimensionMismatchError,
    SingularGramError,
    TooShortError,
)
from .linalg import sym_power, symmetrize

GRAM_TOL = 1e-12


@dataclass
class TimeSeriesData:
    """A T x q block of observations, optionally with variable names."""

    values: np.ndarray
    names: list[str] | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.ndim != 2:
            raise DimensionMismatchError("series must be 2-D")
        if not np.all(np.isfinite(self.values)):
            raise DimensionMismatchError("series contains NaN or infinite entries")
        if self.names is not None and len(self.names) != self.values.shape[1]:
            raise DimensionMismatchError("names length does not match column count")

    @property
    def nobs(self):
        return self.values.shape[0]

    @property
    def nvar(self):
        return self.values.shape[1]


@dataclass
class LagDesign:
    """Aligned response/regressor blocks for one lag order.

    targets holds the raw y_t rows; lagged holds the centered stacked
    regressors, one row per usable t.  ybar/xbar are the window means
    (xbar of the *uncentered* lagged block, needed to recover the raw
    intercept for forecasting).
    """

    p: int
    targets: np.ndarray
    lagged: np.ndarray
    ybar: np.ndarray
    xbar: np.ndarray
    nobs: int = field(init=False)

    def __post_init__(self):
        self.nobs = self.targets.shape[0]

    @property
    def nvar(self):
        return self.targets.shape[1]


def build_lag_design(data, p, presample=None):
    """Assemble the VAR(p) design.

    With presample=None the first p rows of the series are consumed as
    initial conditions; with a (p x q) presample every row of the series
    becomes a target (row -1 of the presample is y_0, row -2 is y_{-1}, ...).
    """
    if not isinstance(data, TimeSeriesData):
        data = TimeSeriesData(np.asarray(data))
    if p < 1:
        raise BadRankError(f"lag order must be >= 1, got {p}")
    y = data.values
    t_raw, q = y.shape
    if presample is not None:
        presample = np.atleast_2d(np.asarray(presample, dtype=float))
        if presample.shape != (p, q):
            raise DimensionMismatchError(
                f"presample must be ({p}, {q}), got {presample.shape}"
            )
        full = np.vstack([presample, y])
        targets = y
        first = p  # index of the first target row inside `full`
    else:
        full = y
        targets = y[p:]
        first = p
    t_eff = targets.shape[0]
    if t_eff <= q * p + 1:
        raise TooShortError(
            f"need more than q*p+1 = {q * p + 1} usable rows, have {t_eff}"
        )
    lagged = np.empty((t_eff, q * p))
    for lag in range(1, p + 1):
        block = full[first - lag : first - lag + t_eff]
        lagged[:, (lag - 1) * q : lag * q] = block
    xbar = lagged.mean(axis=0)
    ybar = targets.mean(axis=0)
    return LagDesign(p=p, targets=targets, lagged=lagged - xbar, ybar=ybar, xbar=xbar)


@dataclass
class AutocovarianceSet:
    """Second moments of a LagDesign plus the metadata fits need."""

    gamma0: np.ndarray         # q x q, cov of y over the window
    gamma_p: np.ndarray        # qp x qp, cov of the stacked regressor
    gamma_star: np.ndarray     # qp x q, cov(x_t, y_t)
    gamma_cond: np.ndarray     # q x q, residual cov of y given x
    gamma_fit: np.ndarray      # q x q, fitted cov, gamma0 - gamma_cond
    nobs: int
    p: int
    ybar: np.ndarray
    xbar: np.ndarray

    @property
    def q(self):
        return self.gamma0.shape[0]


def sample_autocovariances(design):
    """Divisor-T moments of the design window.

    Raises SingularGramError when the lagged Gram matrix is numerically
    singular (min eigenvalue <= 1e-12 of its spectral norm).
    """
    yc = design.targets - design.ybar
    x = design.lagged
    t = design.nobs
    gamma0 = symmetrize(yc.T @ yc / t)
    gamma_p = symmetrize(x.T @ x / t)
    gamma_star = x.T @ yc / t
    w = np.linalg.eigvalsh(gamma_p)
    if w[0] <= GRAM_TOL * max(w[-1], 0.0) or w[-1] <= 0.0:
        raise SingularGramError(
            f"lagged gram matrix near-singular: eigenvalue range [{w[0]:.3e}, {w[-1]:.3e}]"
        )
    fitted = symmetrize(gamma_star.T @ np.linalg.solve(gamma_p, gamma_star))
    return AutocovarianceSet(
        gamma0=gamma0,
        gamma_p=gamma_p,
        gamma_star=gamma_star,
        gamma_cond=symmetrize(gamma0 - fitted),
        gamma_fit=fitted,
        nobs=t,
        p=design.p,
        ybar=design.ybar.copy(),
        xbar=design.xbar.copy(),
    )


def autocov_lag(data, k):
    """Plain lag-k autocovariance (1/T) sum (y_{t-k}-ybar)(y_t-ybar)'."""
    if not isinstance(data, TimeSeriesData):
        data = TimeSeriesData(np.asarray(data))
    y = data.values
    t = y.shape[0]
    if k < 0 or k >= t:
        raise DimensionMismatchError(f"lag {k} outside [0, {t - 1}]")
    yc = y - y.mean(axis=0)
    return yc[: t - k].T @ yc[k:] / t


@dataclass
class CanonicalDecomposition:
    """SVD of the canonical-correlation matrix C = G0^{-1/2} G*' Gp^{-1/2}."""

    matrix: np.ndarray   # q x qp
    u: np.ndarray
    singvals: np.ndarray
    vt: np.ndarray
    rank: int

    def truncated(self, d):
        """Best rank-d approximation from the top-d singular triplets."""
        if d < 0 or d > min(self.matrix.shape):
            raise BadRankError(f"d={d} outside [0, {min(self.matrix.shape)}]")
        if d == 0:
            return np.zeros_like(self.matrix)
        return (self.u[:, :d] * self.singvals[:d]) @ self.vt[:d]


def canonical_correlations(acov):
    """Canonical-correlation matrix between y and its stacked lags.

    Singular values are the sample canonical correlations, all in [0, 1]
    up to roundoff.
    """
    g0_mh = sym_power(acov.gamma0, -0.5)
    gp_mh = sym_power(acov.gamma_p, -0.5)
    c = g0_mh @ acov.gamma_star.T @ gp_mh
    u, s, vt = np.linalg.svd(c, full_matrices=False)
    return CanonicalDecomposition(matrix=c, u=u, singvals=s, vt=vt, rank=int(np.sum(s > 1e-12)))
