"""Iterated forecasting, pseudo-real-time evaluation, and the
stationary bootstrap.

The evaluation convention: with T observations, evaluation start T0 and
maximum horizon H, horizon h uses forecast origins t = T0+H-h, ..., T-h
(1-based), so every horizon predicts the same targets y_{T0+H}, ..., y_T
and contributes exactly T - T0 - H + 1 squared errors.  The aggregate
RMSFE is the root mean square over origins and variables jointly.
"""

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import ParameterVectors, avar, se_ratios
from .estimators import MODELS, fit_model
from .exceptions import BadHorizonError, RenvarError, TooShortError
from .moments import TimeSeriesData, build_lag_design, sample_autocovariances

POLICIES = ("refit", "reuse")


def _rows(data):
    if isinstance(data, TimeSeriesData):
        return data.values
    y = np.asarray(data, dtype=float)
    if y.ndim != 2:
        raise TooShortError("series must be two-dimensional (rows are time points)")
    return y


def forecast_path(estimate, history, h):
    """Iterate the fitted VAR h steps past the end of `history`.

    Earlier forecasts substitute for unavailable observations.  Returns
    an (h, q) array; row j-1 is the j-step-ahead forecast.
    """
    if h < 1:
        raise BadHorizonError(f"horizon must be at least 1, got {h}")
    hist = _rows(history)
    p, q = estimate.p, estimate.q
    if hist.shape[0] < p:
        raise TooShortError(f"history has {hist.shape[0]} rows, need at least p={p}")
    if hist.shape[1] != q:
        raise BadHorizonError(f"history has {hist.shape[1]} columns, estimate has q={q}")
    buf = hist[hist.shape[0] - p :].copy() if p else np.empty((0, q))
    out = np.empty((h, q))
    for j in range(h):
        x = buf[::-1].ravel()  # (y'_t, ..., y'_{t-p+1})'
        out[j] = estimate.intercept + estimate.beta @ x
        if p:
            buf = np.vstack([buf[1:], out[j]])
    return out


def forecast_h(estimate, history, h):
    """The h-step-ahead forecast alone, as a q-vector."""
    return forecast_path(estimate, history, h)[-1]


@dataclass
class ForecastRun:
    """One model's pseudo-real-time evaluation record.

    forecasts[i, h-1] is the (h)-step forecast made at origins[i]; rows
    beyond the end of the sample are NaN.  counts holds the number of
    accumulated errors per horizon, which equals T - T0 - H + 1 for each
    h whenever no origin failed to fit.
    """

    model: str
    p: int
    d: int | None
    u: int | None
    t0: int
    t_end: int
    h_max: int
    policy: str
    origins: np.ndarray
    forecasts: np.ndarray
    rmsfe: np.ndarray
    rmsfe_by_variable: np.ndarray
    counts: np.ndarray
    fit_failures: list = field(default_factory=list)


def evaluate_rmsfe(data, model, p, d=None, u=None, h_max=4, t0_frac=0.75,
                   t0=None, policy="refit", algorithm="auto", options=None):
    """Expanding-window forecast evaluation of one model.

    policy "refit" re-estimates at every origin on data through t;
    "reuse" estimates once on the first T0 rows and only rolls the
    conditioning history forward.  Either way a forecast at origin t
    never sees rows beyond t.
    """
    y = _rows(data)
    t_end, q = y.shape
    if policy not in POLICIES:
        raise BadHorizonError(f"unknown refit policy {policy!r}; want one of {POLICIES}")
    if h_max < 1:
        raise BadHorizonError(f"h_max must be at least 1, got {h_max}")
    if t0 is None:
        t0 = int(math.floor(t0_frac * t_end))
    if not 0 < t0 <= t_end - h_max:
        raise BadHorizonError(
            f"evaluation window is empty: T0={t0}, T={t_end}, H={h_max}"
        )

    def fit_at(n_rows):
        design = build_lag_design(TimeSeriesData(y[:n_rows]), p)
        acov = sample_autocovariances(design)
        return fit_model(acov, model, d=d, u=u, algorithm=algorithm, options=options)

    base = fit_at(t0) if policy == "reuse" else None
    origins = np.arange(t0, t_end)  # 1-based origins t0 .. T-1
    forecasts = np.full((origins.size, h_max, q), np.nan)
    sq_agg = np.zeros(h_max)
    sq_var = np.zeros((h_max, q))
    counts = np.zeros(h_max, dtype=int)
    failures = []
    for i, t in enumerate(origins):
        h_lo = max(1, t0 + h_max - t)
        h_hi = min(h_max, t_end - t)
        if policy == "reuse":
            est = base
        else:
            try:
                est = fit_at(t)
            except RenvarError as exc:
                failures.append((int(t), str(exc)))
                continue
        path = forecast_path(est, y[:t], h_hi)
        forecasts[i, :h_hi] = path
        for h in range(h_lo, h_hi + 1):
            err = y[t + h - 1] - path[h - 1]
            sq_agg[h - 1] += err @ err
            sq_var[h - 1] += err**2
            counts[h - 1] += 1
    if failures:
        warnings.warn(f"{len(failures)} forecast origin(s) failed to fit for {model}")
    denom = np.maximum(counts, 1)
    return ForecastRun(
        model=model, p=p, d=d, u=u, t0=t0, t_end=t_end, h_max=h_max,
        policy=policy, origins=origins, forecasts=forecasts,
        rmsfe=np.sqrt(sq_agg / (denom * q)),
        rmsfe_by_variable=np.sqrt(sq_var / denom[:, None]),
        counts=counts, fit_failures=failures,
    )


def stationary_bootstrap(data, expected_block_length=None, n_samples=1, seed=0):
    """Politis-Romano resamples: geometric block lengths, wrap-around.

    Returns an (n_samples, T, q) array.  The default expected block
    length is ceil(T^(1/3)).
    """
    y = _rows(data)
    t = y.shape[0]
    if expected_block_length is None:
        expected_block_length = math.ceil(t ** (1.0 / 3.0))
    if expected_block_length < 1:
        raise BadHorizonError("expected block length must be at least 1")
    if n_samples < 1:
        raise BadHorizonError("need at least one bootstrap sample")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p_geom = 1.0 / float(expected_block_length)
    out = np.empty((n_samples, t, y.shape[1]))
    for b in range(n_samples):
        idx = np.empty(0, dtype=int)
        while idx.size < t:
            start = int(rng.integers(t))
            length = int(rng.geometric(p_geom))
            idx = np.concatenate([idx, (start + np.arange(length)) % t])
        out[b] = y[idx[:t]]
    return out


@dataclass
class ForecastTableRow:
    model: str
    nop: int
    r_avg: float
    rmsfe: np.ndarray
    rmsfe_se: np.ndarray | None
    n_ok: int


@dataclass
class ForecastTable:
    h_max: int
    n_boot: int
    block_length: int
    policy: str
    t0: int
    rows: list[ForecastTableRow] = field(default_factory=list)

    def row(self, model):
        for r in self.rows:
            if r.model == model:
                return r
        raise KeyError(model)


def _table_rep(task):
    """One bootstrap draw: resample the series, evaluate every model."""
    (y, p, d, u, h_max, t0_frac, policy, algorithm, models,
     block_length, child, resample) = task
    rng = np.random.default_rng(child)
    series = stationary_bootstrap(y, block_length, 1, rng)[0] if resample else y
    out = {}
    for model in models:
        try:
            run = evaluate_rmsfe(series, model, p, d=d, u=u, h_max=h_max,
                                 t0_frac=t0_frac, policy=policy, algorithm=algorithm)
        except RenvarError as exc:
            out[model] = str(exc)
            continue
        out[model] = run.rmsfe
    return out


def bootstrap_forecast_table(data, p, d, u, h_max=4, n_boot=100, t0_frac=0.75,
                             policy="refit", block_length=None, seed=0,
                             workers=1, models=MODELS, algorithm="auto",
                             resample=True):
    """Model-comparison table: NOP, r_avg, and RMSFE_1..H per model.

    With n_boot = 0 (or resample=False) the RMSFE columns are the plain
    pseudo-real-time values on the original series and rmsfe_se is None.
    Otherwise each column is averaged over n_boot stationary-bootstrap
    resamples with its sampling standard error alongside.  NOP and r_avg
    come from full-sample fits, the SE ratios evaluated at the REVAR
    parameter point.  Output is byte-identical for a given seed no
    matter the worker count.
    """
    y = _rows(data)
    if block_length is None:
        block_length = math.ceil(y.shape[0] ** (1.0 / 3.0))
    t0 = int(math.floor(t0_frac * y.shape[0]))
    design = build_lag_design(TimeSeriesData(y), p)
    acov = sample_autocovariances(design)
    fits = {m: fit_model(acov, m, d=d, u=u, algorithm=algorithm) for m in models}
    r_avg = {m: 1.0 for m in models}
    if "revar" in models:
        pv = ParameterVectors.from_estimate(fits["revar"], acov.gamma_p)
        ref = avar("revar", pv)
        for m in models:
            r_avg[m] = 1.0 if m == "revar" else se_ratios(avar(m, pv), ref).r_avg

    table = ForecastTable(h_max=h_max, n_boot=n_boot, block_length=block_length,
                          policy=policy, t0=t0)
    if n_boot == 0:
        for m in models:
            run = evaluate_rmsfe(y, m, p, d=d, u=u, h_max=h_max,
                                 t0_frac=t0_frac, policy=policy, algorithm=algorithm)
            table.rows.append(ForecastTableRow(
                model=m, nop=fits[m].nop, r_avg=r_avg[m],
                rmsfe=run.rmsfe, rmsfe_se=None, n_ok=1,
            ))
        return table

    children = np.random.SeedSequence(seed).spawn(n_boot)
    tasks = [
        (y, p, d, u, h_max, t0_frac, policy, algorithm, tuple(models),
         block_length, children[b], resample)
        for b in range(n_boot)
    ]
    if workers <= 1:
        results = [_table_rep(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_table_rep, tasks))
    for m in models:
        vals = [r[m] for r in results if not isinstance(r[m], str)]
        n_bad = n_boot - len(vals)
        if n_bad:
            warnings.warn(f"{n_bad} bootstrap draw(s) failed for {m}")
        stack = np.array(vals)
        table.rows.append(ForecastTableRow(
            model=m, nop=fits[m].nop, r_avg=r_avg[m],
            rmsfe=stack.mean(axis=0) if len(vals) else np.full(h_max, np.nan),
            rmsfe_se=(stack.std(axis=0, ddof=1) / np.sqrt(len(vals))
                      if len(vals) > 1 else np.full(h_max, np.nan)),
            n_ok=len(vals),
        ))
    return table
