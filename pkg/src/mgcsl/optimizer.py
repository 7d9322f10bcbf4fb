"""Augmented-Lagrangian outer loop with a hand-rolled L-BFGS inner solver.

The inner solver is limited-memory BFGS (two-loop recursion, memory 10) with
a strong-Wolfe line search (bracket + zoom, cubic/quadratic interpolation with
bisection safeguards).  It tracks the best parameter vector ever evaluated and
charges every trial point against a shared evaluation budget, so a budget of
zero returns the starting point untouched.

The outer loop drives the acyclicity value H to tolerance by the classic
schedule: minimize the penalized objective, then grow mu geometrically when H
failed to shrink by factor rho and absorb mu*H into the multiplier gamma.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .acyclicity import CONSTRAINT_KINDS
from .errors import ConfigError, DimensionError, NumericError
from .mlp_bank import pin_self_rows, wam_micro, wam_multigran
from .objective import build_objective, models_from_params, set_penalty
from .sae import contribution_matrix, default_m1

_ACTIVATIONS = ("sigmoid", "tanh")


@dataclass
class HyperParams:
    """Training configuration; defaults are the reference settings."""
    alpha1: float = 0.1
    alpha2: float = 0.01
    eta: float = 300.0
    rho: float = 0.25
    mu0: float = 1e-3
    gamma0: float = 0.0
    h_tolerance: float = 0.1
    mu_max: float = 1e16
    epsilon: float = 0.2
    max_outer: int = 8
    inner_max_evals: int = 1200
    constraint: str = "schur"
    q: int = 5
    m1: int | None = None
    m2: int = 10
    activation: str = "sigmoid"
    support_threshold: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ConfigError("sparsity weights must be non-negative")
        if self.eta <= 1:
            raise ConfigError("penalty growth factor eta must exceed 1")
        if not 0 < self.rho < 1:
            raise ConfigError("sufficient-decrease ratio rho must lie in (0, 1)")
        if self.mu0 <= 0 or self.mu_max <= 0:
            raise ConfigError("penalty coefficients must be positive")
        if self.h_tolerance < 0:
            raise ConfigError("h_tolerance must be non-negative")
        if self.epsilon < 0:
            raise ConfigError("pruning threshold epsilon must be non-negative")
        if self.max_outer < 0 or self.inner_max_evals < 0:
            raise ConfigError("iteration budgets must be non-negative")
        if self.constraint not in CONSTRAINT_KINDS:
            raise ConfigError(f"unknown constraint kind {self.constraint!r}")
        if self.q < 1 or self.m2 < 1:
            raise ConfigError("layer widths must be positive")
        if self.m1 is not None and self.m1 < 1:
            raise ConfigError("layer widths must be positive")
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.support_threshold < 0:
            raise ConfigError("support_threshold must be non-negative")

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown hyperparameter(s): {', '.join(unknown)}")
        return cls(**d)


@dataclass
class AugLagState:
    mu: float
    gamma: float
    h_prev: float


def update_duals(state, h_now, hp):
    """One dual update: grow mu unless H fell by factor rho, absorb mu*H into gamma."""
    mu_new = state.mu * hp.eta if h_now > hp.rho * state.h_prev else state.mu
    gamma_new = state.gamma + state.mu * h_now
    return AugLagState(mu=mu_new, gamma=gamma_new, h_prev=h_now)


# ---------------------------------------------------------------------------
# L-BFGS inner solver
# ---------------------------------------------------------------------------

@dataclass
class InnerResult:
    x: np.ndarray
    f: float
    n_evals: int
    converged: bool
    line_search_failed: bool


class _Budget:
    """Shared evaluation counter that tracks the best finite point seen."""

    def __init__(self, fun, max_evals):
        self.fun = fun
        self.max_evals = max_evals
        self.n = 0
        self.best_f = np.inf
        self.best_x = None

    def __call__(self, x):
        self.n += 1
        f, g = self.fun(x)
        f = float(f)
        if np.isfinite(f) and f < self.best_f:
            self.best_f = f
            self.best_x = x.copy()
        return f, np.asarray(g, dtype=float)

    @property
    def exhausted(self):
        return self.n >= self.max_evals


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic through (a, fa, da) and (b, fb, db); None if degenerate."""
    with np.errstate(all="ignore"):
        d1 = da + db - 3.0 * (fa - fb) / (a - b)
        rad = d1 * d1 - da * db
        if rad < 0:
            return None
        d2 = np.sqrt(rad)
        if b < a:
            d2 = -d2
        denom = db - da + 2.0 * d2
        if denom == 0:
            return None
        t = b - (b - a) * (db + d2 - d1) / denom
    return t if np.isfinite(t) else None


def _quad_min(a, fa, da, b, fb):
    """Minimizer of the quadratic through (a, fa, da) and (b, fb); None if degenerate."""
    with np.errstate(all="ignore"):
        denom = 2.0 * (fb - fa - da * (b - a))
        if denom == 0:
            return None
        t = a - da * (b - a) ** 2 / denom
    return t if np.isfinite(t) else None


def _interp_step(lo, f_lo, d_lo, hi, f_hi, d_hi):
    """Trial step inside (lo, hi): cubic, then quadratic, then bisection."""
    left, right = (lo, hi) if lo < hi else (hi, lo)
    gap = right - left
    for cand in (_cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi),
                 _quad_min(lo, f_lo, d_lo, hi, f_hi)):
        if cand is not None and left + 0.1 * gap <= cand <= right - 0.1 * gap:
            return cand
    return 0.5 * (left + right)


def _wolfe_search(ev, x, f0, g0, direction, t0, c1, c2, max_trials=25):
    """Strong-Wolfe line search along direction from x.

    Returns (t, f_new, g_new, ok).  ok is False when no acceptable step was
    found (or the budget ran out); in that case t/f/g describe the last trial.
    """
    d0 = float(np.dot(g0, direction))
    if d0 >= 0:
        return 0.0, f0, g0, False

    def phi(t):
        f, g = ev(x + t * direction)
        dphi = float(np.dot(g, direction)) if np.isfinite(f) else np.nan
        return f, g, dphi

    # Bracketing phase.
    t_prev, f_prev, d_prev = 0.0, f0, d0
    g_prev = g0
    t = t0
    bracket = None
    g_lo = g0
    for i in range(max_trials):
        if ev.exhausted:
            return t_prev, f_prev, g_prev, False
        f_t, g_t, d_t = phi(t)
        if (not np.isfinite(f_t)) or f_t > f0 + c1 * t * d0 or (i > 0 and f_t >= f_prev):
            bracket = (t_prev, f_prev, d_prev, t, f_t, d_t)
            g_lo = g_prev
            break
        if abs(d_t) <= -c2 * d0:
            return t, f_t, g_t, True
        if d_t >= 0:
            bracket = (t, f_t, d_t, t_prev, f_prev, d_prev)
            g_lo = g_t
            break
        t_prev, f_prev, d_prev, g_prev = t, f_t, d_t, g_t
        t = 2.0 * t
    if bracket is None:
        return t_prev, f_prev, g_prev, False

    # Zoom phase: (lo, hi) with lo the best end satisfying Armijo.
    lo, f_lo, d_lo, hi, f_hi, d_hi = bracket
    for _ in range(max_trials):
        if ev.exhausted:
            break
        if not np.isfinite(f_hi):
            t = 0.5 * (lo + hi)
        else:
            t = _interp_step(lo, f_lo, d_lo, hi, f_hi, d_hi)
        if abs(hi - lo) * max(abs(t), 1.0) < 1e-14:
            break
        f_t, g_t, d_t = phi(t)
        if (not np.isfinite(f_t)) or f_t > f0 + c1 * t * d0 or f_t >= f_lo:
            hi, f_hi, d_hi = t, f_t, d_t
        else:
            if abs(d_t) <= -c2 * d0:
                return t, f_t, g_t, True
            if d_t * (hi - lo) >= 0:
                hi, f_hi, d_hi = lo, f_lo, d_lo
            lo, f_lo, d_lo, g_lo = t, f_t, d_t, g_t
    if np.isfinite(f_lo) and f_lo < f0 and lo > 0:
        # Armijo progress without curvature: accept rather than discard it.
        return lo, f_lo, g_lo, True
    return lo, f_lo, g_lo, False


def minimize_lbfgs(fun, x0, max_evals=500, memory=10, gtol=1e-5,
                   c1=1e-4, c2=0.9):
    """Minimize fun(x) -> (value, gradient) starting from x0.

    Stops on gradient infinity-norm <= gtol, a stalled line search, step-size
    underflow, or the evaluation budget; the best point evaluated is returned
    either way.  max_evals == 0 returns x0 untouched.
    """
    x0 = np.asarray(x0, dtype=float).copy()
    if max_evals <= 0:
        return InnerResult(x=x0, f=np.nan, n_evals=0, converged=False,
                           line_search_failed=False)
    ev = _Budget(fun, max_evals)
    f, g = ev(x0)
    if not np.isfinite(f):
        raise NumericError("objective is non-finite at the starting point")
    x = x0
    s_hist, y_hist, rho_hist = [], [], []
    converged = False
    ls_failed = False
    while not ev.exhausted:
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= gtol:
            converged = True
            break
        # Two-loop recursion for the search direction.
        q = g.copy()
        alphas = []
        for s, y, r in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = r * float(np.dot(s, q))
            alphas.append(a)
            q -= a * y
        if s_hist:
            gamma = float(np.dot(s_hist[-1], y_hist[-1]) /
                          np.dot(y_hist[-1], y_hist[-1]))
            q *= gamma
        for s, y, r, a in zip(s_hist, y_hist, rho_hist, reversed(alphas)):
            b = r * float(np.dot(y, q))
            q += (a - b) * s
        direction = -q
        dg = float(np.dot(g, direction))
        if not np.isfinite(dg) or dg >= 0:
            direction = -g
            s_hist, y_hist, rho_hist = [], [], []
        t0 = 1.0 if s_hist else min(1.0, 1.0 / max(float(np.sum(np.abs(g))), 1e-12))
        t, f_new, g_new, ok = _wolfe_search(ev, x, f, g, direction, t0, c1, c2)
        if not ok:
            ls_failed = not ev.exhausted
            break
        s = t * direction
        if float(np.max(np.abs(s))) < 1e-12:
            break
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-10 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x = x + s
        f, g = f_new, g_new
    best_x = ev.best_x if ev.best_x is not None else x0
    return InnerResult(x=best_x, f=ev.best_f, n_evals=ev.n,
                       converged=converged, line_search_failed=ls_failed)


# ---------------------------------------------------------------------------
# Full fit
# ---------------------------------------------------------------------------

@dataclass
class FitResult:
    c: np.ndarray
    s: np.ndarray
    a: np.ndarray
    macro_supports: np.ndarray
    params: ad.ParameterSet
    trace: list = field(default_factory=list)
    converged: bool = False
    reason: str = "max_outer"
    h_final: float = np.nan
    objective_final: float = np.nan
    runtime_seconds: float = 0.0
    hp: HyperParams | None = None
    n: int = 0
    d: int = 0
    x_mean: np.ndarray | None = None
    warnings: list = field(default_factory=list)


def center_columns(x):
    """Subtract the per-column mean; variances are left untouched.  Returns (xc, mean).

    Dividing by the column standard deviations as well turns out to be
    destructive here: it rescales the fit-term gradients below the fixed
    sparsity prices, so the encoder and the input layers of the target
    networks shrink toward zero instead of learning.  Keeping raw variances
    preserves the gradient signal; only the offsets are removed so the
    sigmoid layers start in their active range.
    """
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=0)
    return x - mean, mean


def _value_and_grad_closure(graph):
    template = graph.params0
    names = list(template.arrays)

    def fun(w):
        ps = template.unflatten(w)
        grads = ad.gradients(graph.root, ps)
        val = float(graph.root.value[0, 0])
        gflat = np.concatenate([grads[k].ravel() for k in names]) if names else np.zeros(0)
        return val, gflat

    return fun


def _describe_nonfinite(graph, ps):
    bad = []
    for name, term in graph.terms.items():
        try:
            v = ad.evaluate(term, ps)
        except NumericError:
            bad.append(name)
            continue
        if not np.all(np.isfinite(v)):
            bad.append(name)
    detail = ", ".join(bad) if bad else "unknown term"
    return NumericError(f"objective became non-finite (offending term(s): {detail})")


def fit(x, hp=None):
    """Learn weighted adjacencies from raw data x; returns a FitResult.

    The data is mean-centered per column, the objective graph is built once,
    and the augmented-Lagrangian loop alternates inner L-BFGS solves with
    dual updates until H reaches tolerance, mu hits its cap, or the outer
    budget runs out.  Self-rows of the per-target input weights are
    projected back to zero after every inner solve.
    """
    if hp is None:
        hp = HyperParams()
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionError(f"X must be 2-D, got shape {x.shape}")
    if x.shape[0] < 2 or x.shape[1] < 2:
        raise DimensionError(f"X needs at least 2 rows and 2 columns, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("X contains non-finite values")
    t_start = time.perf_counter()
    n, d = x.shape
    xs, x_mean = center_columns(x)
    graph = build_objective(xs, alpha1=hp.alpha1, alpha2=hp.alpha2, q=hp.q,
                            m2=hp.m2, m1=hp.m1, activation=hp.activation,
                            constraint=hp.constraint, seed=hp.seed)
    template = graph.params0
    fun = _value_and_grad_closure(graph)
    w = template.flatten()

    ps = template.unflatten(w)
    h_init = float(ad.evaluate(graph.h_expr, ps)[0, 0])
    state = AugLagState(mu=hp.mu0, gamma=hp.gamma0, h_prev=h_init)
    trace = []
    warnings = []
    converged = False
    reason = "max_outer"
    h_now = h_init
    obj_now = np.nan
    for outer in range(hp.max_outer):
        set_penalty(graph, state.mu, state.gamma)
        it_start = time.perf_counter()
        try:
            res = minimize_lbfgs(fun, w, max_evals=hp.inner_max_evals)
        except NumericError:
            raise _describe_nonfinite(graph, template.unflatten(w)) from None
        w = res.x
        ps = template.unflatten(w)
        pin_self_rows(ps.arrays, graph.bank.d, graph.bank.q)
        w = ps.flatten()
        obj_now = float(ad.evaluate(graph.root, ps)[0, 0])
        h_now = float(graph.h_expr.value[0, 0])
        if not np.isfinite(obj_now):
            raise _describe_nonfinite(graph, ps)
        if res.line_search_failed:
            warnings.append(f"outer {outer}: line search stalled after "
                            f"{res.n_evals} evaluations")
        trace.append({"outer": outer, "mu": state.mu, "gamma": state.gamma,
                      "h": h_now, "objective": obj_now,
                      "inner_evals": res.n_evals,
                      "inner_converged": bool(res.converged),
                      "seconds": time.perf_counter() - it_start})
        state = update_duals(state, h_now, hp)
        if h_now <= hp.h_tolerance:
            converged = True
            reason = "h_tolerance"
            break
        if state.mu >= hp.mu_max:
            reason = "mu_max"
            break

    ps = template.unflatten(w)
    sae_f, bank_f = models_from_params(graph, ps)
    a = contribution_matrix(sae_f)
    c = wam_micro(bank_f, a)
    s = wam_multigran(bank_f)
    supports = a >= hp.support_threshold
    return FitResult(c=c, s=s, a=a, macro_supports=supports, params=ps,
                     trace=trace, converged=converged, reason=reason,
                     h_final=h_now, objective_final=obj_now,
                     runtime_seconds=time.perf_counter() - t_start,
                     hp=hp, n=n, d=d, x_mean=x_mean,
                     warnings=warnings)
