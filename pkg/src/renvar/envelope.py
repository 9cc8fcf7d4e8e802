"""Envelope objective and its Grassmann-manifold minimizers.

Two numerical backends compute the objective/gradient kernel: a compiled
Cython extension and a numpy reference (renvar._objective_py).  The
compiled one is picked at import when available; RENVAR_PURE_PYTHON=1
forces the fallback.  Both must agree to near machine precision.

Optimization runs on orthonormal basis representatives of u-planes with
a projected gradient, a Cayley curvilinear retraction and Armijo
backtracking, so every accepted step strictly decreases the objective.
"""

import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _objective_py
from .exceptions import BadDimsError, DegenerateCandidateError
from .linalg import orthogonal_complement, sym_power

try:
    from . import _envelope_kernel
except ImportError:  # extension not built; numpy fallback carries the load
    _envelope_kernel = None

_FORCE_PY = os.environ.get("RENVAR_PURE_PYTHON", "") not in ("", "0")
_BACKEND = "python" if (_envelope_kernel is None or _FORCE_PY) else "cython"

# boundary eigengap under which the analytic gradient of the truncated
# eigenvalue sum is unreliable and finite differences take over
DEGENERATE_GAP = 1e-10
FD_STEP = 1e-6


def active_backend():
    return _BACKEND


def use_backend(name):
    """Switch kernels at runtime ('cython' or 'python'); used by the benchmark."""
    global _BACKEND
    if name not in ("cython", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "cython" and _envelope_kernel is None:
        raise RuntimeError("compiled kernel not available")
    _BACKEND = name


class EnvelopeContext:
    """Precomputed moments for repeated objective evaluations at fixed (p, d)."""

    def __init__(self, acov, d):
        q = acov.q
        if not 1 <= d <= q:
            raise BadDimsError(f"need 1 <= d <= q, got d={d}, q={q}")
        self.q = q
        self.d = d
        self.gamma0 = np.asfortranarray(acov.gamma0)
        self.gamma0_inv = np.asfortranarray(sym_power(acov.gamma0, -1.0))
        self.gamma_cond = np.asfortranarray(acov.gamma_cond)
        self.gamma_fit = np.asarray(acov.gamma_fit)
        self.n_evals = 0

    def value(self, dmat, d=None):
        d = self.d if d is None else d
        self.n_evals += 1
        dmat = np.asfortranarray(dmat)
        if _BACKEND == "cython":
            return _envelope_kernel.objective_value(
                self.gamma0, self.gamma0_inv, self.gamma_cond, dmat, d
            )
        return _objective_py.objective_value(
            self.gamma0, self.gamma0_inv, self.gamma_cond, dmat, d
        )

    def grad(self, dmat, d=None):
        """Return (value, euclidean gradient).  Falls back to central
        finite differences when the kept/dropped pencil eigenvalues nearly
        touch, where the perturbation formula degenerates."""
        d = self.d if d is None else d
        self.n_evals += 1
        dmat = np.asfortranarray(dmat)
        if _BACKEND == "cython":
            grad = np.empty(dmat.shape, order="F")
            val, gap = _envelope_kernel.objective_grad(
                self.gamma0, self.gamma0_inv, self.gamma_cond, dmat, d, grad
            )
        else:
            val, grad, gap = _objective_py.objective_grad(
                self.gamma0, self.gamma0_inv, self.gamma_cond, dmat, d
            )
        if gap < DEGENERATE_GAP:
            grad = self._fd_grad(dmat, d)
        return val, grad

    def _fd_grad(self, dmat, d):
        grad = np.empty(dmat.shape)
        pert = dmat.copy(order="F")
        for j in range(dmat.shape[1]):
            for i in range(dmat.shape[0]):
                base = dmat[i, j]
                pert[i, j] = base + FD_STEP
                up = self.value(pert, d)
                pert[i, j] = base - FD_STEP
                down = self.value(pert, d)
                pert[i, j] = base
                grad[i, j] = (up - down) / (2.0 * FD_STEP)
        return grad


def envelope_objective(acov, basis, d):
    """One-shot objective evaluation; builds a throwaway context."""
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    _check_dims(d, basis.shape[1], acov.q)
    return EnvelopeContext(acov, d).value(basis)


def _check_dims(d, u, q):
    if not 1 <= d <= u <= q:
        raise BadDimsError(f"need 1 <= d <= u <= q, got (d={d}, u={u}, q={q})")


@dataclass
class OptimizerOptions:
    max_iter: int = 500
    gtol: float = 1e-6
    ftol: float = 1e-8
    restarts: int = 5
    seed: int = 0
    max_backtracks: int = 50
    armijo: float = 1e-4
    polish: bool = True


@dataclass
class EnvelopeFit:
    basis: np.ndarray
    value: float
    converged: bool
    n_iter: int
    start_label: str
    trajectory: np.ndarray = field(default_factory=lambda: np.empty(0))


def _top_eigvecs(m, u):
    w, v = np.linalg.eigh(m)
    return v[:, ::-1][:, :u]


def _cayley_retract(dmat, gmat, tau):
    # W = G D' - D G' is skew; the Cayley curve through D with velocity -G
    q = dmat.shape[0]
    w = gmat @ dmat.T - dmat @ gmat.T
    lhs = np.eye(q) + (tau / 2.0) * w
    rhs = (np.eye(q) - (tau / 2.0) * w) @ dmat
    return np.linalg.solve(lhs, rhs)


def _descend(ctx, dmat, d, opts, retract):
    """Shared monotone descent loop; retract(D, G, tau) produces trials."""
    val, grad = ctx.grad(dmat, d)
    traj = [val]
    tau = 1e-2
    prev_d = None
    prev_g = None
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        g_proj = grad - dmat @ (dmat.T @ grad)
        gnorm2 = float(np.sum(g_proj * g_proj))
        if np.sqrt(gnorm2) < opts.gtol:
            converged = True
            break
        if prev_d is not None:
            s = dmat - prev_d
            y = g_proj - prev_g
            sy = abs(float(np.sum(s * y)))
            if sy > 1e-300:
                tau = float(np.sum(s * s)) / sy
        tau = min(max(tau, 1e-12), 1e3)
        prev_d, prev_g = dmat, g_proj
        accepted = False
        step = tau
        for _ in range(opts.max_backtracks):
            try:
                trial = retract(dmat, g_proj, step)
                trial_val = ctx.value(trial, d)
            except DegenerateCandidateError:
                step *= 0.5
                continue
            if trial_val <= val - opts.armijo * step * gnorm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # no admissible decrease left at working precision
            converged = np.sqrt(gnorm2) < 1e3 * opts.gtol
            break
        dmat = trial
        new_val, grad = ctx.grad(dmat, d)
        if abs(val - new_val) <= opts.ftol * (1.0 + abs(val)):
            val = new_val
            traj.append(val)
            converged = True
            break
        val = new_val
        traj.append(val)
    return dmat, val, converged, it, np.asarray(traj)


def _fg_starts(ctx, u, opts):
    starts = [
        ("eig-gamma0", _top_eigvecs(ctx.gamma0, u)),
        ("eig-cond", _top_eigvecs(ctx.gamma_cond, u)),
        ("eig-fit", _top_eigvecs(ctx.gamma_fit, u)),
    ]
    try:
        one_d = optimize_envelope_1d(ctx, u, replace(opts, restarts=1))
        starts.append(("one-d", one_d.basis))
    except DegenerateCandidateError:
        pass
    rng = np.random.default_rng(opts.seed)
    while len(starts) < max(opts.restarts, 1):
        draw = rng.standard_normal((ctx.q, u))
        qmat, _ = np.linalg.qr(draw)
        starts.append(("random", qmat))
    return starts[: max(opts.restarts, 1)]


def optimize_envelope_fg(ctx, u, options=None):
    """Full-Grassmannian minimization of the envelope objective.

    Runs a small set of deterministic starts (leading eigenvector spans of
    the marginal, conditional and fitted covariances, the 1D solution, and
    seeded random draws) and keeps the best converged value.
    """
    opts = options or OptimizerOptions()
    _check_dims(ctx.d, u, ctx.q)
    if u == ctx.q:
        basis = np.eye(ctx.q)
        return EnvelopeFit(basis, ctx.value(basis), True, 0, "full")
    best = None
    for label, start in _fg_starts(ctx, u, opts):
        try:
            dmat, val, conv, n_iter, traj = _descend(ctx, start, ctx.d, opts, _cayley_retract)
        except DegenerateCandidateError:
            continue
        fit = EnvelopeFit(dmat, val, conv, n_iter, label, traj)
        if best is None or fit.value < best.value:
            best = fit
    if best is None:
        raise DegenerateCandidateError("every start failed; moments too degenerate")
    if not best.converged:
        warnings.warn("envelope optimizer hit iteration limit; returning best iterate")
    return best


def _sphere_candidates(ctx, comp):
    """Unit starting directions inside the complement spanned by `comp`."""
    cands = []
    for mat in (ctx.gamma_fit, ctx.gamma0, ctx.gamma_cond):
        proj = comp.T @ mat @ comp
        w, v = np.linalg.eigh(0.5 * (proj + proj.T))
        cands.append(v[:, -1])
        cands.append(v[:, 0])
    out = []
    for a in cands:
        if all(abs(abs(float(a @ b)) - 1.0) > 1e-8 for b in out):
            out.append(a)
    return out


def optimize_envelope_1d(ctx, u, options=None):
    """Sequential one-direction minimization.

    Directions accumulate one at a time; step k minimizes the objective of
    the k-plane [accumulated, new] with rank min(d, k) over unit vectors in
    the orthogonal complement of the accumulated span.  Each subproblem
    reuses the descent loop on the sphere.
    """
    opts = options or OptimizerOptions()
    _check_dims(ctx.d, u, ctx.q)
    if u == ctx.q:
        basis = np.eye(ctx.q)
        return EnvelopeFit(basis, ctx.value(basis), True, 0, "full")
    q = ctx.q
    accum = np.zeros((q, 0))
    total_iters = 0
    converged = True
    for k in range(1, u + 1):
        comp = np.eye(q) if k == 1 else orthogonal_complement(accum)
        d_eff = min(ctx.d, k)

        class _Restricted:
            """Objective on the sphere a -> F([accum, comp a])."""

            def __init__(self, outer, accum, comp, d_eff):
                self.outer = outer
                self.accum = accum
                self.comp = comp
                self.d_eff = d_eff

            def _stack(self, a):
                return np.hstack([self.accum, (self.comp @ a)[:, None]])

            def value(self, a, d=None):
                return self.outer.value(self._stack(a[:, 0] if a.ndim == 2 else a), self.d_eff)

            def grad(self, a, d=None):
                a = a[:, 0] if a.ndim == 2 else a
                val, gfull = self.outer.grad(self._stack(a), self.d_eff)
                return val, (self.comp.T @ gfull[:, -1])[:, None]

        sub = _Restricted(ctx, accum, comp, d_eff)
        best = None
        for a0 in _sphere_candidates(ctx, comp):
            try:
                a, val, conv, n_iter, _ = _descend(
                    ctx=sub,
                    dmat=a0[:, None],
                    d=d_eff,
                    opts=opts,
                    retract=lambda dm, g, tau: _normalize_col(dm - tau * g),
                )
            except DegenerateCandidateError:
                continue
            if best is None or val < best[1]:
                best = (a, val, conv, n_iter)
        if best is None:
            raise DegenerateCandidateError(f"1D step {k}: all starting directions failed")
        a, _, conv, n_iter = best
        total_iters += n_iter
        converged = converged and conv
        accum = np.hstack([accum, comp @ a])
    final_val = ctx.value(accum, ctx.d)
    if not converged:
        warnings.warn("1D optimizer hit iteration limit in a subproblem")
    return EnvelopeFit(accum, final_val, converged, total_iters, "one-d")


def _normalize_col(a):
    nrm = np.linalg.norm(a)
    if nrm == 0.0:
        raise DegenerateCandidateError("zero step direction on sphere")
    return a / nrm


def polish_fit(ctx, u, fit, options=None):
    """Refine an existing basis with the full-Grassmannian descent.

    Returns the refined fit when it improves on `fit`, otherwise `fit`
    unchanged.  Descent is monotone, so the returned value never exceeds
    the input value.
    """
    opts = options or OptimizerOptions()
    _check_dims(ctx.d, u, ctx.q)
    if u == ctx.q:
        return fit
    dmat, val, conv, n_iter, traj = _descend(ctx, fit.basis, ctx.d, opts, _cayley_retract)
    if val < fit.value:
        return EnvelopeFit(dmat, val, conv, fit.n_iter + n_iter, fit.start_label + "+fg", traj)
    return fit
