"""Continuous subproblem for a fixed decision.

Minimises ``F(phi) = sum |phi - phi0| + lam * sum_n W2^2(P0_n, P_n(phi))`` over
the open candidates subject to the demand target and ``phi >= phi_min``.

The main engine is an exact-penalty projected subgradient method; the
Wasserstein subgradient comes from the transport potentials chained through
the choice probabilities. Every start gets a short screening run, the most
promising ones are run to convergence, the best feasible iterates are refined with SLSQP on the epigraph form of the l1 term, and each candidate
is repaired onto the feasible set and re-evaluated exactly before the best
one is kept.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .model import NodeObjective, SolverConfig

_POLISH_CANDIDATES = 1
_SCREEN_ITERS = 60
_CONTINUE = 2


@dataclass
class InnerResult:
    phi: np.ndarray | None
    j_cost: float
    w_cost: float
    total: float
    q: float
    feasible: bool
    iterations: int
    starts: int
    rho: float


@dataclass
class _Run:
    """Subgradient trajectory state, so a screened run can be resumed."""

    x: np.ndarray
    rho: float
    it: int = 0
    best_f: float = np.inf
    best_x: np.ndarray | None = None
    best_p: float = np.inf
    best_px: np.ndarray | None = None
    done: bool = False

    @property
    def score(self) -> float:
        return self.best_f if self.best_x is not None else np.inf


def _subgradient(obj: NodeObjective, run: _Run, cfg: SolverConfig, n_iter: int, deadline: float) -> int:
    """Advance ``run`` by at most ``n_iter`` steps; returns the number of steps taken."""
    lam, target = obj.lam, obj.target
    step0 = cfg.step_scale * float(np.max(np.abs(obj.phi0_full)))
    x = np.maximum(run.x, cfg.phi_min)
    rho = run.rho
    stall = 0
    taken = 0
    while taken < n_iter and run.it < cfg.max_iter:
        if lam > 0:
            J, W, gJ, gW = obj.evaluate(x)
        else:
            J, W, gJ, gW = obj.j_cost(x), 0.0, np.sign(x - obj.phi0), 0.0
        F = J + lam * W
        viol = max(0.0, target - obj.demand(x))
        P = F + rho * viol
        taken += 1
        improved = False
        if viol == 0.0 and F < run.best_f - cfg.tol * max(1.0, abs(run.best_f) if np.isfinite(run.best_f) else 1.0):
            run.best_f, run.best_x = F, x
            improved = True
        if P < run.best_p - cfg.tol * max(1.0, abs(run.best_p) if np.isfinite(run.best_p) else 1.0):
            run.best_p, run.best_px = P, x
            improved = True
        stall = 0 if improved else stall + 1
        if stall >= cfg.patience or time.perf_counter() > deadline:
            run.done = True
            break
        g = gJ + lam * gW
        if viol > 0.0:
            g = g - rho * obj.demand_grad(x)
        gn = float(np.linalg.norm(g))
        if gn <= 1e-15:
            run.done = True
            break
        step = step0 / (1.0 + run.it / cfg.step_tau)
        x = np.maximum(cfg.phi_min, x - step * g / gn)
        run.it += 1
    if run.it >= cfg.max_iter:
        run.done = True
    run.x = x
    return taken


def _multiplier_estimate(obj: NodeObjective, x) -> float:
    """Twice an upper estimate of ``|grad F| / |grad Q|`` at ``x``, a penalty weight
    above the likely constraint multiplier."""
    gq = float(np.linalg.norm(obj.demand_grad(x)))
    if gq <= 0.0:
        return 0.0
    gf = np.sqrt(obj.k)
    if obj.lam > 0:
        gf += obj.lam * float(np.linalg.norm(obj.evaluate(x)[3]))
    return 2.0 * gf / gq


def _run_start(obj, s, cfg, n_iter, deadline) -> tuple[_Run, int]:
    """Run from ``s``, raising the penalty until a feasible iterate appears."""
    x = np.maximum(np.asarray(s, dtype=float), cfg.phi_min)
    run = _Run(x=x, rho=max(cfg.rho0, _multiplier_estimate(obj, x)))
    total = 0
    while True:
        total += _subgradient(obj, run, cfg, n_iter, deadline)
        if run.best_x is not None or run.rho >= cfg.rho_max or time.perf_counter() > deadline:
            return run, total
        run.rho *= cfg.rho_growth
        run.x = run.best_px if run.best_px is not None else run.x
        run.it = 0
        run.best_p, run.done = np.inf, False


def _polish(obj: NodeObjective, x0: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    k = obj.k
    phi0, lam, target = obj.phi0, obj.lam, obj.target
    last = {}

    def ev(phi):
        key = phi.tobytes()
        if last.get("key") != key:
            if lam > 0:
                _, W, _, gW = obj.evaluate(phi)
            else:
                W, gW = 0.0, np.zeros(k)
            last.update(key=key, W=W, gW=gW)
        return last["W"], last["gW"]

    def fun(y):
        W, _ = ev(y[:k])
        return float(y[k:].sum() + lam * W)

    def jac(y):
        _, gW = ev(y[:k])
        return np.concatenate([lam * gW, np.ones(k)])

    eye = np.eye(k)
    abs_jac = np.block([[-eye, eye], [eye, eye]])
    constraints = [
        {"type": "ineq",
         "fun": lambda y: np.concatenate([y[k:] - (y[:k] - phi0), y[k:] + (y[:k] - phi0)]),
         "jac": lambda y: abs_jac},
        {"type": "ineq",
         "fun": lambda y: np.array([obj.demand(y[:k]) - target]),
         "jac": lambda y: np.concatenate([obj.demand_grad(y[:k]), np.zeros(k)])[None, :]},
    ]
    bounds = [(cfg.phi_min, None)] * k + [(0.0, None)] * k
    y0 = np.concatenate([x0, np.abs(x0 - phi0)])
    with warnings.catch_warnings():
        # SLSQP clips its own line-search steps to the bounds and says so
        warnings.filterwarnings("ignore", message="Values in x were outside bounds")
        res = minimize(fun, y0, jac=jac, bounds=bounds, constraints=constraints, method="SLSQP",
                       options={"maxiter": 100, "ftol": 1e-13})
    x = np.asarray(res.x[:k], dtype=float)
    return x if np.all(np.isfinite(x)) else x0


def candidate_starts(obj: NodeObjective, start: np.ndarray, cfg: SolverConfig, rng) -> list[np.ndarray]:
    """Given start, its uniform rescaling, one-facility rescalings, and random perturbations."""
    from .warmstart import scale_to_target

    starts = [np.asarray(start, dtype=float)]
    for mask in [np.ones(obj.k, dtype=bool)] + [np.eye(obj.k, dtype=bool)[i] for i in range(obj.k)]:
        phi, _ = scale_to_target(obj, mask)
        if phi is not None:
            starts.append(phi)
    for _ in range(cfg.multistart):
        pert = np.asarray(start) * np.exp(rng.normal(0.0, 0.5, size=obj.k))
        starts.append(np.maximum(pert, cfg.phi_min))
    unique = []
    for s in starts:
        if not any(np.allclose(s, u, rtol=1e-12, atol=0) for u in unique):
            unique.append(s)
    return unique


def inner_solve(obj: NodeObjective, cfg: SolverConfig, start, rng=None,
                deadline: float | None = None) -> InnerResult:
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if deadline is None:
        deadline = time.perf_counter() + cfg.time_limit
    starts = candidate_starts(obj, start, cfg, rng)
    iterations = 0
    runs = []
    for s in starts:
        run, its = _run_start(obj, s, cfg, _SCREEN_ITERS, deadline)
        iterations += its
        runs.append(run)
        if time.perf_counter() > deadline:
            break
    order = sorted(range(len(runs)), key=lambda i: (runs[i].score, i))
    for i in order[:_CONTINUE]:
        run = runs[i]
        if not run.done and run.best_x is not None and time.perf_counter() <= deadline:
            iterations += _subgradient(obj, run, cfg, cfg.max_iter, deadline)
    rho = max(run.rho for run in runs)
    candidates = [run.best_x if run.best_x is not None else run.best_px
                  for run in runs if run.best_x is not None or run.best_px is not None]

    scored = []
    for x in candidates:
        x = obj.repair(x, cfg.phi_min)
        if x is not None:
            scored.append((obj.total(x), len(scored), x))
    scored.sort(key=lambda t: (t[0], t[1]))
    if cfg.polish:
        for _, _, x in scored[:_POLISH_CANDIDATES]:
            if time.perf_counter() > deadline:
                break
            y = obj.repair(_polish(obj, x, cfg), cfg.phi_min)
            if y is not None:
                scored.append((obj.total(y), len(scored), y))
        scored.sort(key=lambda t: (t[0], t[1]))
    if not scored:
        return InnerResult(None, np.inf, np.inf, np.inf, 0.0, False, iterations, len(starts), rho)
    x = scored[0][2]
    J, W, _, _ = obj.evaluate(x)
    return InnerResult(
        phi=x,
        j_cost=J,
        w_cost=W,
        total=J + obj.lam * W,
        q=obj.demand(x),
        feasible=True,
        iterations=iterations,
        starts=len(starts),
        rho=rho,
    )
