"""Command-line entry points: fit, select, simulate, forecast.

Every run writes a manifest.json (resolved config + library version,
no timestamps) next to its results; `--from-manifest manifest.json`
replays the run and reproduces every output byte for byte.  Numeric
CSV/JSON output uses shortest round-trip decimals.  Exit codes:
0 success, 1 finished with warnings, 2 input or usage error.
"""

import argparse
import configparser
import csv
import json
import math
import os
import sys
import warnings

import numpy as np

from . import __version__
from .asymptotics import ParameterVectors, avar
from .envelope import OptimizerOptions
from .estimators import MODELS, fit_model
from .exceptions import CannotStabilizeError, RenvarError
from .forecast import bootstrap_forecast_table
from .moments import TimeSeriesData, build_lag_design, sample_autocovariances
from .selection import select_dims, select_lag, select_rank
from .simulate import (
    FAMILIES,
    SelectionScenario,
    SimulationScenario,
    run_monte_carlo,
    run_selection_study,
)

OUTPUT_DIR_ENV = "RENVAR_OUTPUT_DIR"


class UsageError(RenvarError):
    """Bad input file or flag combination; carries a JSON-ready detail dict."""

    def __init__(self, message, **detail):
        super().__init__(message)
        self.detail = detail


def _fmt(x):
    """Shortest decimal that round-trips; empty cell for None."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _write_matrix(path, mat):
    mat = np.atleast_2d(mat)
    with open(path, "w") as fh:
        for row in mat:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, default=_jsonable)
        fh.write("\n")


def _read_series(path):
    """Parse a header-first numeric CSV; errors name the offending cell."""
    if not os.path.exists(path):
        raise UsageError(f"input file not found: {path}", path=path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise UsageError(f"input file is empty: {path}", path=path) from None
        names = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(names):
                raise UsageError(
                    f"row {lineno} has {len(row)} cells, header has {len(names)}",
                    row=lineno,
                )
            parsed = []
            for j, cell in enumerate(row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise UsageError(
                        f"non-numeric cell at row {lineno}, column {names[j]!r}",
                        row=lineno, column=names[j], cell=cell,
                    ) from None
            rows.append(parsed)
    if not rows:
        raise UsageError(f"no data rows in {path}", path=path)
    try:
        return TimeSeriesData(np.array(rows), names)
    except RenvarError as exc:
        raise UsageError(str(exc), path=path) from None


def _pv_for(est, gamma_p):
    """Parameter point for SE computation at a fitted estimate.

    olsvar and rrvar are the u = q boundary of the envelope family, so
    their missing basis is the identity and omega is sigma itself.
    """
    if est.phi is not None:
        return ParameterVectors.from_estimate(est, gamma_p)
    q = est.q
    nu = est.nu if est.nu is not None else np.eye(q)
    bmat = est.bmat if est.bmat is not None else est.beta
    return ParameterVectors(
        gamma_p=gamma_p, sigma=est.sigma, beta=est.beta, amat=nu, bmat=bmat,
        phi=np.eye(q), phi0=np.zeros((q, 0)), nu=nu, omega=est.sigma,
        omega0=np.zeros((0, 0)), p=est.p, q=q, d=est.d, u=q,
    )


def _write_manifest(outdir, command, config):
    _write_json(os.path.join(outdir, "manifest.json"), {
        "version": __version__,
        "subcommand": command,
        "config": config,
    })


# ---------------------------------------------------------------- fit

def cmd_fit(config, outdir):
    data = _read_series(config["input"])
    design = build_lag_design(data, config["p"])
    acov = sample_autocovariances(design)
    models = list(MODELS) if config["model"] == "all" else [config["model"]]
    options = OptimizerOptions(seed=config["seed"])
    summary = []
    for m in models:
        est = fit_model(acov, m, d=config["d"], u=config["u"],
                        algorithm=config["algorithm"], options=options)
        _write_matrix(os.path.join(outdir, f"beta_{m}.csv"), est.beta)
        _write_matrix(os.path.join(outdir, f"sigma_{m}.csv"), est.sigma)
        se = avar(m, _pv_for(est, acov.gamma_p)).se_beta(acov.nobs)
        se = se.reshape(est.q, est.q * est.p, order="F")
        _write_matrix(os.path.join(outdir, f"se_beta_{m}.csv"), se)
        record = {
            "model": m, "p": est.p, "q": est.q, "d": est.d, "u": est.u,
            "nop": est.nop, "loglik": est.loglik, "converged": est.converged,
            "alpha": est.alpha, "intercept": est.intercept,
        }
        if est.objective is not None:
            record["objective"] = est.objective
        for key in ("phi", "phi0", "nu", "bmat", "omega", "omega0"):
            val = getattr(est, key)
            if val is not None:
                record[key] = val
        _write_json(os.path.join(outdir, f"estimate_{m}.json"), record)
        summary.append([m, est.p, est.d, est.u, est.nop, est.loglik, est.converged])
        print(f"{m}: loglik={est.loglik:.6f} nop={est.nop} converged={est.converged}")
    _write_csv(os.path.join(outdir, "summary.csv"),
               ["model", "p", "d", "u", "nop", "loglik", "converged"], summary)


# ------------------------------------------------------------- select

def cmd_select(config, outdir):
    data = _read_series(config["input"])
    lag = select_lag(data, config["p_max"], config["criterion"])
    p_fit = max(lag.p_hat, 1)
    design = build_lag_design(data, p_fit)
    acov = sample_autocovariances(design)
    options = OptimizerOptions(seed=config["seed"])
    dims = select_dims(acov, mode=config["mode"], criterion=config["criterion"],
                       alpha=config["alpha"], u_method=config["u_method"],
                       algorithm=config["algorithm"], options=options)
    rank_tests = []
    if config["mode"] == "sequential":
        rank_tests = select_rank(acov, config["alpha"]).tests

    rows = [["lag", p, "", "", v, "", "", "", "", ""]
            for p, v in zip(lag.p_grid, lag.values)]
    rows += [["rank", "", t.d0, "", "", t.statistic, t.dof, t.pvalue, "", ""]
             for t in rank_tests]
    for cell in dims.table:
        rows.append(["dims", "", cell.get("d", dims.d_hat), cell.get("u"),
                     "", cell.get("statistic"), cell.get("dof"),
                     cell.get("pvalue"), cell.get("loglik"), cell.get("ic")])
    _write_csv(os.path.join(outdir, "selection.csv"),
               ["stage", "p", "d", "u", "value", "statistic", "dof",
                "pvalue", "loglik", "ic"], rows)
    _write_json(os.path.join(outdir, "selection.json"), {
        "p_hat": lag.p_hat, "d_hat": dims.d_hat, "u_hat": dims.u_hat,
        "mode": dims.mode, "criterion": config["criterion"],
        "alpha": config["alpha"], "u_method": config["u_method"],
        "lag_grid": [{"p": int(p), "value": float(v)}
                     for p, v in zip(lag.p_grid, lag.values)],
        "rank_tests": [{"d0": t.d0, "statistic": t.statistic,
                        "dof": t.dof, "pvalue": t.pvalue} for t in rank_tests],
        "dim_table": dims.table,
    })
    print(f"p_hat={lag.p_hat} d_hat={dims.d_hat} u_hat={dims.u_hat}")


# ----------------------------------------------------------- simulate

MC_HEADER = ["T", "model", "mean_error", "se_mean", "r_min", "r_max",
             "n_ok", "n_failed"]
SEL_HEADER = ["T", "pct_p", "pct_d", "pct_u", "n_ok", "n_failed"]


def _parse_scenarios(path, default_seed):
    """INI config, one section per scenario.  Keys: kind (mc|selection),
    d, u, p, q, errors, sizes, reps, seed, algorithm, and for selection
    runs pmax, alpha, criterion."""
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}", path=path)
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise UsageError(f"bad config file: {exc}", path=path) from None
    if not parser.sections():
        raise UsageError(f"config file has no scenario sections: {path}", path=path)
    scenarios = []
    for name in parser.sections():
        sec = parser[name]
        try:
            family = sec.get("errors", "normal").strip().lower().replace("-", "_")
            if family not in FAMILIES:
                raise UsageError(
                    f"scenario {name!r}: unknown errors family {family!r}",
                    scenario=name,
                )
            sc = {
                "name": name,
                "kind": sec.get("kind", "mc").strip().lower(),
                "d": sec.getint("d"), "u": sec.getint("u"),
                "p": sec.getint("p"), "q": sec.getint("q"),
                "errors": family,
                "reps": sec.getint("reps", 100),
                "seed": sec.getint("seed", default_seed),
                "algorithm": sec.get("algorithm", "auto").strip(),
            }
            if sc["kind"] == "mc":
                sc["sizes"] = [int(s) for s in sec.get(
                    "sizes", "160,270,450,740,1200,2000").split(",")]
                sc["se_ratios"] = sec.getboolean("se_ratios", True)
            elif sc["kind"] == "selection":
                sc["sizes"] = [int(s) for s in sec.get(
                    "sizes", "240,450,700,950,1200").split(",")]
                sc["pmax"] = sec.getint("pmax", 3)
                sc["alpha"] = sec.getfloat("alpha", 0.05)
                sc["criterion"] = sec.get("criterion", "bic").strip().lower()
            else:
                raise UsageError(
                    f"scenario {name!r}: kind must be mc or selection",
                    scenario=name,
                )
            if None in (sc["d"], sc["u"], sc["p"], sc["q"]):
                raise UsageError(
                    f"scenario {name!r}: d, u, p, q are all required",
                    scenario=name,
                )
        except (ValueError, configparser.Error) as exc:
            raise UsageError(f"scenario {name!r}: {exc}", scenario=name) from None
        scenarios.append(sc)
    return scenarios


def cmd_simulate(config, outdir):
    for sc in config["scenarios"]:
        path = os.path.join(outdir, f"{sc['name']}.csv")
        if sc["kind"] == "mc":
            scenario = SimulationScenario(
                d=sc["d"], u=sc["u"], p=sc["p"], q=sc["q"], family=sc["errors"],
                sample_sizes=tuple(sc["sizes"]), replications=sc["reps"],
                seed=sc["seed"], algorithm=sc["algorithm"],
                compute_se_ratios=sc["se_ratios"],
            )
            try:
                report = run_monte_carlo(scenario, workers=config["threads"])
            except CannotStabilizeError as exc:
                warnings.warn(f"scenario {sc['name']!r} failed: {exc}")
                _write_csv(path, MC_HEADER,
                           [[-1, f"failed:{type(exc).__name__}", float("nan"),
                             float("nan"), None, None, 0, sc["reps"]]])
                continue
            _write_csv(path, MC_HEADER, [
                [r.sample_size, r.model, r.mean_error, r.sem_error,
                 r.r_min, r.r_max, r.n_ok, r.n_failed]
                for r in report.rows
            ])
        else:
            scenario = SelectionScenario(
                d=sc["d"], u=sc["u"], p=sc["p"], q=sc["q"], family=sc["errors"],
                sample_sizes=tuple(sc["sizes"]), replications=sc["reps"],
                seed=sc["seed"], p_max=sc["pmax"], alpha=sc["alpha"],
                criterion=sc["criterion"], algorithm=sc["algorithm"],
            )
            try:
                report = run_selection_study(scenario, workers=config["threads"])
            except CannotStabilizeError as exc:
                warnings.warn(f"scenario {sc['name']!r} failed: {exc}")
                _write_csv(path, SEL_HEADER,
                           [[-1, float("nan"), float("nan"), float("nan"),
                             0, sc["reps"]]])
                continue
            _write_csv(path, SEL_HEADER, [
                [r.sample_size, r.pct_p, r.pct_d, r.pct_u, r.n_ok, r.n_failed]
                for r in report.rows
            ])
        print(f"{sc['name']}: wrote {path}")


# ----------------------------------------------------------- forecast

def cmd_forecast(config, outdir):
    data = _read_series(config["input"])
    t_all = data.values.shape[0]
    t0 = int(math.floor(config["eval_start"] * t_all))
    p, d, u = config["p"], config["d"], config["u"]
    if p is None or d is None or u is None:
        if not 0 < t0 < t_all:
            raise UsageError(f"evaluation start {config['eval_start']} leaves no "
                             "training sample to select dimensions on")
        pre = TimeSeriesData(data.values[:t0], data.names)
        if p is None:
            p = max(select_lag(pre, 4, "bic").p_hat, 1)
        if d is None or u is None:
            acov = sample_autocovariances(build_lag_design(pre, p))
            dims = select_dims(acov, mode="sequential", u_method="ic",
                               algorithm=config["algorithm"])
            d = d if d is not None else max(dims.d_hat, 1)
            u = u if u is not None else max(dims.u_hat, d)
        print(f"selected on first {t0} rows: p={p} d={d} u={u}")
    table = bootstrap_forecast_table(
        data.values, p, d, u, h_max=config["horizons"],
        n_boot=config["bootstrap"], t0_frac=config["eval_start"],
        policy=config["policy"], block_length=config["block_length"],
        seed=config["seed"], workers=config["threads"],
        algorithm=config["algorithm"],
    )
    header = ["model", "NOP", "r_avg"]
    header += [f"h={h}" for h in range(1, table.h_max + 1)]
    if table.n_boot > 0:
        header += [f"se_h{h}" for h in range(1, table.h_max + 1)]
    rows = []
    for r in table.rows:
        row = [r.model, r.nop, r.r_avg, *r.rmsfe]
        if table.n_boot > 0:
            row += list(r.rmsfe_se)
        rows.append(row)
    _write_csv(os.path.join(outdir, "forecast_table.csv"), header, rows)
    _write_json(os.path.join(outdir, "forecast_table.json"), {
        "h_max": table.h_max, "n_boot": table.n_boot,
        "block_length": table.block_length, "policy": table.policy,
        "t0": table.t0, "p": p, "d": d, "u": u,
        "rows": [{
            "model": r.model, "nop": r.nop, "r_avg": r.r_avg,
            "rmsfe": r.rmsfe,
            "rmsfe_se": r.rmsfe_se, "n_ok": r.n_ok,
        } for r in table.rows],
    })
    for r in table.rows:
        cells = " ".join(f"{v:.4f}" for v in r.rmsfe)
        print(f"{r.model:>7} nop={r.nop:>5} r_avg={r.r_avg:.4f} rmsfe: {cells}")


# ------------------------------------------------------------ wiring

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="renvar",
        description="Reduced-rank and envelope vector autoregressions.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default=None,
                        help=f"output directory (default ${OUTPUT_DIR_ENV} or cwd)")
    common.add_argument("--from-manifest", default=None, metavar="PATH",
                        help="replay a previous run from its manifest.json")
    common.add_argument("--seed", type=int, default=0)

    fit = sub.add_parser("fit", parents=[common],
                         help="estimate one model or all four on a CSV series")
    fit.add_argument("data", nargs="?", help="input CSV (header row, oldest first)")
    fit.add_argument("--model", default="revar", choices=list(MODELS) + ["all"])
    fit.add_argument("--p", type=int, default=1, help="lag order")
    fit.add_argument("--d", type=int, default=None, help="coefficient rank")
    fit.add_argument("--u", type=int, default=None, help="envelope dimension")
    fit.add_argument("--algorithm", default="auto", choices=["auto", "fg", "1d"])

    sel = sub.add_parser("select", parents=[common],
                         help="choose lag order, rank, and envelope dimension")
    sel.add_argument("data", nargs="?")
    sel.add_argument("--pmax", type=int, default=4, dest="p_max")
    sel.add_argument("--criterion", default="bic", choices=["aic", "bic"])
    sel.add_argument("--alpha", type=float, default=0.05)
    sel.add_argument("--mode", default="sequential", choices=["sequential", "grid"])
    sel.add_argument("--u-method", default="chi2", choices=["chi2", "ic"],
                     dest="u_method")
    sel.add_argument("--algorithm", default="auto", choices=["auto", "fg", "1d"])

    sim = sub.add_parser("simulate", parents=[common],
                         help="run Monte Carlo scenarios from an INI config")
    sim.add_argument("config", nargs="?", help="INI file, one section per scenario")
    sim.add_argument("--threads", type=int, default=1)

    fc = sub.add_parser("forecast", parents=[common],
                        help="pseudo-real-time forecast comparison table")
    fc.add_argument("data", nargs="?")
    fc.add_argument("--p", type=int, default=None)
    fc.add_argument("--d", type=int, default=None)
    fc.add_argument("--u", type=int, default=None)
    fc.add_argument("--eval-start", type=float, default=0.75, dest="eval_start")
    fc.add_argument("--horizons", type=int, default=4)
    fc.add_argument("--bootstrap", type=int, default=100)
    fc.add_argument("--block-length", type=int, default=None, dest="block_length")
    fc.add_argument("--policy", default="refit", choices=["refit", "reuse"])
    fc.add_argument("--algorithm", default="auto", choices=["auto", "fg", "1d"])
    fc.add_argument("--threads", type=int, default=1)
    return parser


def _config_from_args(args, parser):
    def need_input(attr):
        value = getattr(args, attr)
        if value is None:
            parser.error(f"the {attr} argument is required unless --from-manifest is given")
        return os.path.abspath(value)

    if args.command == "fit":
        return {"input": need_input("data"), "model": args.model, "p": args.p,
                "d": args.d, "u": args.u, "algorithm": args.algorithm,
                "seed": args.seed}
    if args.command == "select":
        return {"input": need_input("data"), "p_max": args.p_max,
                "criterion": args.criterion, "alpha": args.alpha,
                "mode": args.mode, "u_method": args.u_method,
                "algorithm": args.algorithm, "seed": args.seed}
    if args.command == "simulate":
        path = need_input("config")
        return {"config_path": path,
                "scenarios": _parse_scenarios(path, args.seed),
                "seed": args.seed, "threads": args.threads}
    if args.command == "forecast":
        return {"input": need_input("data"), "p": args.p, "d": args.d,
                "u": args.u, "eval_start": args.eval_start,
                "horizons": args.horizons, "bootstrap": args.bootstrap,
                "block_length": args.block_length, "policy": args.policy,
                "algorithm": args.algorithm, "seed": args.seed,
                "threads": args.threads}
    parser.error(f"unknown command {args.command!r}")


def _load_manifest(path, command):
    if not os.path.exists(path):
        raise UsageError(f"manifest not found: {path}", path=path)
    with open(path) as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad manifest: {exc}", path=path) from None
    if manifest.get("subcommand") != command:
        raise UsageError(
            f"manifest is for {manifest.get('subcommand')!r}, not {command!r}",
            path=path,
        )
    return manifest["config"]


_DISPATCH = {
    "fit": cmd_fit,
    "select": cmd_select,
    "simulate": cmd_simulate,
    "forecast": cmd_forecast,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.from_manifest:
            config = _load_manifest(args.from_manifest, args.command)
        else:
            config = _config_from_args(args, parser)
        outdir = args.output_dir or os.environ.get(OUTPUT_DIR_ENV) or os.getcwd()
        os.makedirs(outdir, exist_ok=True)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            _DISPATCH[args.command](config, outdir)
        _write_manifest(outdir, args.command, config)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        return 1 if caught else 0
    except UsageError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc), **exc.detail}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 2
    except RenvarError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 2
    except OSError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
