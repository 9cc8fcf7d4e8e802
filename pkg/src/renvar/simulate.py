"""Data-generating processes and Monte Carlo studies.

The DGP draws a semiorthogonal basis and low-rank coefficient once per
scenario, normalizes the coefficient to unit Frobenius norm, and rejects
non-stationary draws by redrawing the rank factors.  Six innovation
families are available; the four i.i.d. ones are standardized so the
pre-mixing vector has identity covariance.

Replication streams come from numpy SeedSequence spawning, so results
are bit-identical for a given master seed regardless of worker count.
"""

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

from .asymptotics import ParameterVectors, avar, companion_matrix, se_ratios
from .estimators import fit_evar, fit_olsvar, fit_revar, fit_rrvar
from .exceptions import (
    BadDimsError,
    BadFamilyError,
    CannotStabilizeError,
    RenvarError,
)
from .linalg import orthogonal_complement, sym_power, symmetrize
from .moments import TimeSeriesData, build_lag_design, sample_autocovariances
from .selection import select_dims, select_lag, select_rank

FAMILIES = ("normal", "uniform", "t6", "chi2_6", "mds", "sv_mds")

STABILITY_BOUND = 1.0 - 1e-6
MAX_STATIONARY_TRIES = 1000


@dataclass
class TrueParameters:
    p: int
    q: int
    d: int
    u: int
    phi: np.ndarray
    phi0: np.ndarray
    nu: np.ndarray
    bmat: np.ndarray
    omega: np.ndarray
    omega0: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate_true_parameters(d, u, p, q, seed=0):
    """Draw one stationary parameter set for the (d, u, p, q) scenario.

    Omega is the u x u matrix (-0.9)^|i-j|, Omega0 the (q-u) x (q-u)
    matrix 5 (-0.5)^|i-j|; phi comes from a QR of uniform draws with the
    positive-diagonal sign convention; nu is standard normal and B
    uniform, jointly rescaled so ||beta||_F = 1.  nu and B are redrawn
    until the companion matrix is stable.
    """
    if not 1 <= d <= u <= q or p < 1:
        raise BadDimsError(f"need 1 <= d <= u <= q and p >= 1, got ({d}, {u}, {p}, {q})")
    rng = _as_rng(seed)
    omega = sla.toeplitz((-0.9) ** np.arange(u))
    omega0 = 5.0 * sla.toeplitz((-0.5) ** np.arange(q - u)) if q > u else np.zeros((0, 0))
    raw = rng.uniform(0.0, 1.0, size=(q, u))
    phi, rmat = np.linalg.qr(raw)
    phi = phi * np.sign(np.diag(rmat))
    phi0 = orthogonal_complement(phi)
    for _ in range(MAX_STATIONARY_TRIES):
        bmat = rng.uniform(0.0, 1.0, size=(d, q * p))
        nu = rng.standard_normal((u, d))
        beta = phi @ nu @ bmat
        norm = np.linalg.norm(beta)
        if norm == 0.0:
            continue
        nu = nu / norm
        beta = beta / norm
        radius = np.max(np.abs(np.linalg.eigvals(companion_matrix(beta))))
        if radius < STABILITY_BOUND:
            break
    else:
        raise CannotStabilizeError(
            f"no stationary draw in {MAX_STATIONARY_TRIES} tries for ({d}, {u}, {p}, {q})"
        )
    sigma = phi @ omega @ phi.T
    if q > u:
        sigma = sigma + phi0 @ omega0 @ phi0.T
    return TrueParameters(
        p=p, q=q, d=d, u=u, phi=phi, phi0=phi0, nu=nu, bmat=bmat,
        omega=omega, omega0=omega0, beta=beta, sigma=symmetrize(sigma),
    )


def generate_errors(family, t, sigma, seed=0):
    """Draw T innovation rows with the requested dependence family.

    The i.i.d. families mix a standardized vector with sigma^{1/2}.  The
    mds family differences a Gaussian random walk (its increments are
    again i.i.d. Gaussian, which is the point: a trivial but exact
    martingale-difference sequence).  sv_mds modulates Gaussian rows by a
    slowly varying lognormal volatility with cross-correlated shocks.
    """
    rng = _as_rng(seed)
    q = sigma.shape[0]
    root = sym_power(sigma, 0.5)
    if family == "normal":
        ups = rng.standard_normal((t, q))
    elif family == "uniform":
        ups = (rng.uniform(0.0, 1.0, size=(t, q)) - 0.5) * np.sqrt(12.0)
    elif family == "t6":
        ups = rng.standard_t(6, size=(t, q)) / np.sqrt(1.5)
    elif family == "chi2_6":
        ups = (rng.chisquare(6, size=(t, q)) - 6.0) / np.sqrt(12.0)
    elif family == "mds":
        steps = rng.standard_normal((t + 1, q)) @ root  # zeta_1 then increments
        zeta = np.cumsum(steps, axis=0)
        return np.diff(zeta, axis=0)
    elif family == "sv_mds":
        base = rng.standard_normal((t, q)) @ root
        vu_root = sym_power(sla.toeplitz(0.9 ** np.arange(q)), 0.5)
        shocks = rng.standard_normal((t, q)) @ vu_root
        log_vol = np.zeros(q)
        out = np.empty((t, q))
        for i in range(t):
            log_vol = 0.25 * log_vol + 0.05 * shocks[i]
            out[i] = base[i] * np.exp(log_vol)
        return out
    else:
        raise BadFamilyError(f"unknown family {family!r}; want one of {FAMILIES}")
    return ups @ root


def simulate_var(params, t, family="normal", seed=0, presample=None):
    """Generate T rows from the VAR implied by `params` (zero intercept).

    The presample is standard normal unless supplied; returns
    (TimeSeriesData, presample) so designs can condition on it.
    """
    rng = _as_rng(seed)
    p, q = params.p, params.q
    if presample is None:
        presample = rng.standard_normal((p, q))
    else:
        presample = np.atleast_2d(np.asarray(presample, dtype=float))
    errors = generate_errors(family, t, params.sigma, rng)
    hist = np.vstack([presample, np.zeros((t, q))])
    blocks = params.beta.reshape(q, p, q)  # beta = [B_1 ... B_p], lag-major
    for i in range(t):
        row = errors[i].copy()
        for lag in range(1, p + 1):
            row += blocks[:, lag - 1] @ hist[p + i - lag]
        hist[p + i] = row
    return TimeSeriesData(hist[p:]), presample


@dataclass
class SimulationScenario:
    """Estimation-error study: fit the four models across sample sizes."""

    d: int
    u: int
    p: int
    q: int
    family: str = "normal"
    sample_sizes: tuple = (160, 270, 450, 740, 1200, 2000)
    replications: int = 100
    seed: int = 0
    algorithm: str = "auto"
    compute_se_ratios: bool = True

    def dims(self):
        return self.d, self.u, self.p, self.q


@dataclass
class McRow:
    sample_size: int
    model: str
    mean_error: float
    sem_error: float
    r_min: float | None
    r_max: float | None
    n_ok: int
    n_failed: int


@dataclass
class McReport:
    scenario: dict
    rows: list[McRow] = field(default_factory=list)

    def row(self, sample_size, model):
        for r in self.rows:
            if r.sample_size == sample_size and r.model == model:
                return r
        raise KeyError((sample_size, model))


_MC_MODELS = ("olsvar", "rrvar", "evar", "revar")


def _mc_rep(task):
    """One replication: simulate, fit all four models, measure errors."""
    scenario, params, t, child = task
    rng = np.random.default_rng(child)
    data, presample = simulate_var(params, t, scenario.family, rng)
    design = build_lag_design(data, scenario.p, presample=presample)
    acov = sample_autocovariances(design)
    d, u = scenario.d, scenario.u
    try:
        fits = {
            "olsvar": fit_olsvar(acov),
            "rrvar": fit_rrvar(acov, d),
            "evar": fit_evar(acov, u, algorithm=scenario.algorithm),
            "revar": fit_revar(acov, d, u, algorithm=scenario.algorithm),
        }
    except RenvarError as exc:
        return {"failed": str(exc)}
    out = {"failed": None}
    for name, est in fits.items():
        out[name] = float(np.linalg.norm(est.beta - params.beta))
    if scenario.compute_se_ratios:
        pv = ParameterVectors.from_estimate(fits["revar"], acov.gamma_p)
        ref = avar("revar", pv)
        for name in ("olsvar", "rrvar", "evar"):
            ratios = se_ratios(avar(name, pv), ref)
            out[f"rmin_{name}"] = ratios.r_min
            out[f"rmax_{name}"] = ratios.r_max
    return out


def _map_reps(func, tasks, workers):
    if workers <= 1:
        return [func(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def run_monte_carlo(scenario, workers=1):
    """Estimation-error study over scenario.sample_sizes.

    True parameters are drawn once from the master seed; each (T, rep)
    pair gets its own spawned stream.  Worker count never changes the
    output, only the wall time.
    """
    sizes = list(scenario.sample_sizes)
    reps = scenario.replications
    root = np.random.SeedSequence(scenario.seed)
    children = root.spawn(1 + len(sizes) * reps)
    params = generate_true_parameters(
        scenario.d, scenario.u, scenario.p, scenario.q,
        seed=np.random.default_rng(children[0]),
    )
    report = McReport(scenario=asdict(scenario))
    for si, t in enumerate(sizes):
        tasks = [
            (scenario, params, t, children[1 + si * reps + r])
            for r in range(reps)
        ]
        results = _map_reps(_mc_rep, tasks, workers)
        failures = [r for r in results if r["failed"] is not None]
        if failures:
            warnings.warn(f"{len(failures)} replication(s) failed at T={t}")
        good = [r for r in results if r["failed"] is None]
        for model in _MC_MODELS:
            errs = np.array([r[model] for r in good])
            if scenario.compute_se_ratios and model != "revar":
                r_min = float(np.mean([r[f"rmin_{model}"] for r in good]))
                r_max = float(np.mean([r[f"rmax_{model}"] for r in good]))
            else:
                r_min = r_max = None
            report.rows.append(McRow(
                sample_size=t,
                model=model,
                mean_error=float(errs.mean()) if len(errs) else float("nan"),
                sem_error=float(errs.std(ddof=1) / np.sqrt(len(errs))) if len(errs) > 1 else float("nan"),
                r_min=r_min,
                r_max=r_max,
                n_ok=len(good),
                n_failed=len(failures),
            ))
    return report


@dataclass
class SelectionScenario:
    """Order-selection study: how often the staged pipeline recovers
    the true (p, d, u)."""

    d: int
    u: int
    p: int
    q: int
    family: str = "normal"
    sample_sizes: tuple = (240, 450, 700, 950, 1200)
    replications: int = 100
    seed: int = 0
    p_max: int = 3
    alpha: float = 0.05
    criterion: str = "bic"
    algorithm: str = "auto"


@dataclass
class SelectionRow:
    sample_size: int
    pct_p: float
    pct_d: float
    pct_u: float
    n_ok: int
    n_failed: int


@dataclass
class SelectionReport:
    scenario: dict
    rows: list[SelectionRow] = field(default_factory=list)


def _selection_rep(task):
    scenario, params, t, child = task
    rng = np.random.default_rng(child)
    data, presample = simulate_var(params, t, scenario.family, rng)
    try:
        p_hat = select_lag(data, scenario.p_max, scenario.criterion).p_hat
        fit_p = max(p_hat, 1)  # rank/dimension need at least one lag
        design = build_lag_design(data, fit_p, presample=presample if fit_p == scenario.p else None)
        acov = sample_autocovariances(design)
        d_hat = select_rank(acov, scenario.alpha).d_hat
        if d_hat == 0:
            u_hat = 0
        else:
            u_hat = select_dims(
                acov, mode="sequential", criterion=scenario.criterion,
                alpha=scenario.alpha, u_method="ic", algorithm=scenario.algorithm,
            ).u_hat
    except RenvarError as exc:
        return {"failed": str(exc)}
    return {"failed": None, "p": p_hat, "d": d_hat, "u": u_hat}


def run_selection_study(scenario, workers=1):
    """Fraction of replications recovering the true lag, rank, and
    envelope dimension with the staged BIC / chi-squared / BIC pipeline."""
    sizes = list(scenario.sample_sizes)
    reps = scenario.replications
    root = np.random.SeedSequence(scenario.seed)
    children = root.spawn(1 + len(sizes) * reps)
    params = generate_true_parameters(
        scenario.d, scenario.u, scenario.p, scenario.q,
        seed=np.random.default_rng(children[0]),
    )
    report = SelectionReport(scenario=asdict(scenario))
    for si, t in enumerate(sizes):
        tasks = [
            (scenario, params, t, children[1 + si * reps + r])
            for r in range(reps)
        ]
        results = _map_reps(_selection_rep, tasks, workers)
        good = [r for r in results if r["failed"] is None]
        n_fail = len(results) - len(good)
        if n_fail:
            warnings.warn(f"{n_fail} selection replication(s) failed at T={t}")
        denom = max(len(good), 1)
        report.rows.append(SelectionRow(
            sample_size=t,
            pct_p=100.0 * sum(r["p"] == scenario.p for r in good) / denom,
            pct_d=100.0 * sum(r["d"] == scenario.d for r in good) / denom,
            pct_u=100.0 * sum(r["u"] == scenario.u for r in good) / denom,
            n_ok=len(good),
            n_failed=n_fail,
        ))
    return report
