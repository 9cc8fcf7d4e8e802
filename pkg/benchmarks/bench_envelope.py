"""Compare the compiled envelope-objective kernel against the pure-Python
reference: microbenchmarks of value/gradient evaluations plus end-to-end
fit timings, at a few (q, u, d) sizes.

Run:  python benchmarks/bench_envelope.py [--reps 200]
"""

import argparse
import time

import numpy as np

import renvar
from renvar.envelope import EnvelopeContext, active_backend, use_backend
from renvar.estimators import fit_revar
from renvar.moments import build_lag_design, sample_autocovariances
from renvar.simulate import generate_true_parameters, simulate_var

CASES = (
    (3, 4, 1, 7, 1200),    # d, u, p, q, T
    (5, 10, 1, 20, 1200),
    (8, 16, 2, 30, 2000),
)


def _acov_for(case, seed=0):
    d, u, p, q, t = case
    params = generate_true_parameters(d, u, p, q, seed=seed)
    data, presample = simulate_var(params, t, "normal", seed=seed + 1)
    return sample_autocovariances(build_lag_design(data, p, presample=presample))


def _time(fn, reps):
    best = float("inf")
    for _ in range(max(3, reps // 50)):
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        best = min(best, (time.perf_counter() - t0) / reps)
    return best


def bench_case(case, reps):
    d, u, p, q, t = case
    acov = _acov_for(case)
    rng = np.random.default_rng(0)
    dmat = np.linalg.qr(rng.standard_normal((q, u)))[0]
    out = {}
    for backend in ("python", "cython"):
        try:
            use_backend(backend)
        except RuntimeError:
            out[backend] = None
            continue
        ctx = EnvelopeContext(acov, d)
        val = ctx.value(dmat)
        out.setdefault("value_check", []).append(val)
        out[backend] = {
            "value": _time(lambda: ctx.value(dmat), reps),
            "grad": _time(lambda: ctx.grad(dmat), reps),
            "fit": _time(lambda: fit_revar(acov, d, u), max(1, reps // 100)),
        }
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=200)
    args = ap.parse_args()
    initial = active_backend()
    print(f"renvar {renvar.__version__}, default backend: {initial}")
    header = f"{'case (d,u,p,q,T)':>22} {'op':>6} {'python':>12} {'cython':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for case in CASES:
        res = bench_case(case, args.reps)
        checks = res.get("value_check", [])
        if len(checks) == 2 and abs(checks[0] - checks[1]) > 1e-10 * max(1.0, abs(checks[0])):
            print(f"  WARNING: backend values disagree: {checks}")
        for op in ("value", "grad", "fit"):
            py = res["python"][op]
            cy = res["cython"][op] if res["cython"] else None
            cy_s = f"{cy * 1e6:10.1f}us" if cy else "       n/a"
            ratio = f"{py / cy:7.2f}x" if cy else "     n/a"
            print(f"{str(case):>22} {op:>6} {py * 1e6:10.1f}us {cy_s} {ratio}")
    use_backend(initial)


if __name__ == "__main__":
    main()
