"""Bounded-variable revised simplex.

Two-phase method on the equality form ``A x + S s = b`` where ``S`` holds
one slack (``<=``) or surplus (``>=``) column per inequality row. Nonbasic
variables sit at one of their bounds; the basis inverse is kept explicitly
and updated with eta transformations, refactorised every ``REFACTOR``
pivots. Sizes handled here are small (a few hundred rows), so dense linear
algebra is adequate.

The entering variable has the largest reduced-cost violation; after more
than ``m`` consecutive degenerate pivots both choices switch to Bland's rule
(lowest index) until the objective moves again, which rules out cycling.
"""

from __future__ import annotations

import numpy as np

from ..errors import LpError
from .problem import EQ, GE, LE, TOL, LpProblem, LpSolution, Tolerances

REFACTOR = 50
# entries below this share of the largest column entry never pivot
REL_PIVOT = 1e-9


class _State:
    def __init__(self, A, b, lower, upper, basis, x, tol: Tolerances):
        self.A = A
        self.b = b
        self.lower = lower
        self.upper = upper
        self.basis = basis
        self.x = x
        self.tol = tol
        self.is_basic = np.zeros(A.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.binv = None
        self.iterations = 0

    def refactor(self):
        B = self.A[:, self.basis]
        try:
            self.binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise LpError(
                f"singular basis after {self.iterations} pivots "
                f"(basis columns {self.basis.tolist()[:20]}...)"
            ) from exc
        cond = np.linalg.norm(B, 1) * np.linalg.norm(self.binv, 1)
        if not np.isfinite(cond) or cond > 1e13:
            raise LpError(f"ill-conditioned basis (condition ~{cond:.3g}) after {self.iterations} pivots")
        nonbasic = ~self.is_basic
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.binv @ rhs

    def run(self, cost, max_iter: int) -> str:
        """Iterate to optimality for ``cost``; returns ``optimal`` or ``unbounded``."""
        A, tol = self.A, self.tol
        lower, upper, x = self.lower, self.upper, self.x
        movable = lower < upper
        self.refactor()
        since_refactor = 0
        degenerate_run = 0
        while True:
            if self.iterations >= max_iter:
                raise LpError(f"iteration limit {max_iter} reached")
            if since_refactor >= REFACTOR:
                self.refactor()
                since_refactor = 0
            y = cost[self.basis] @ self.binv
            d = cost - y @ A
            at_upper = x >= upper  # nonbasic variables sit exactly on a bound
            improving = (~self.is_basic) & movable & (
                ((~at_upper) & (d < -tol.dual_feasibility)) | (at_upper & (d > tol.dual_feasibility))
            )
            cand = np.flatnonzero(improving)
            if cand.size == 0:
                return "optimal"
            if degenerate_run > self.A.shape[0]:
                j = int(cand[0])  # Bland: lowest index enters
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            direction = -1.0 if at_upper[j] else 1.0
            alpha = self.binv @ A[:, j]
            delta = direction * alpha
            xb = x[self.basis]
            lb = lower[self.basis]
            ub = upper[self.basis]
            ratios = np.full(delta.size, np.inf)
            piv_tol = max(tol.pivot, REL_PIVOT * float(np.abs(delta).max(initial=0.0)))
            dec = delta > piv_tol
            inc = delta < -piv_tol
            ratios[dec] = (xb[dec] - lb[dec]) / delta[dec]
            fin = inc & np.isfinite(ub)
            ratios[fin] = (ub[fin] - xb[fin]) / (-delta[fin])
            np.maximum(ratios, 0.0, out=ratios)
            t_flip = upper[j] - lower[j]
            t_min = ratios.min() if ratios.size else np.inf
            if not np.isfinite(t_min) and not np.isfinite(t_flip):
                return "unbounded"
            self.iterations += 1
            since_refactor += 1
            if t_flip <= t_min:
                x[self.basis] = xb - t_flip * delta
                x[j] = upper[j] if direction > 0 else lower[j]
                continue
            degenerate_run = degenerate_run + 1 if t_min <= 0.0 else 0
            ties = np.flatnonzero(ratios <= t_min + 1e-12 * max(1.0, t_min))
            r = int(ties[np.argmin(self.basis[ties])])  # Bland: lowest index leaves
            leaving = int(self.basis[r])
            x[self.basis] = xb - t_min * delta
            x[j] = x[j] + direction * t_min
            x[leaving] = lower[leaving] if delta[r] > 0 else upper[leaving]
            self.is_basic[leaving] = False
            self.is_basic[j] = True
            self.basis[r] = j
            piv = alpha[r]
            row = self.binv[r] / piv
            self.binv -= np.outer(alpha, row)
            self.binv[r] = row


def solve_revised(p: LpProblem, tol: Tolerances = TOL, max_iter: int | None = None) -> LpSolution:
    A0 = p.dense()
    m, n = A0.shape
    b = p.rhs.copy()
    slack_rows = [i for i, s in enumerate(p.senses) if s != EQ]
    S = np.zeros((m, len(slack_rows)))
    for k, i in enumerate(slack_rows):
        S[i, k] = 1.0 if p.senses[i] == LE else -1.0
    A_std = np.hstack([A0, S])
    n_std = A_std.shape[1]
    lower = np.concatenate([p.lower, np.zeros(len(slack_rows))])
    upper = np.concatenate([p.upper, np.full(len(slack_rows), np.inf)])

    x = lower.copy()
    resid = b - A_std @ x
    sign = np.where(resid >= 0, 1.0, -1.0)
    A = np.hstack([A_std, np.diag(sign)])
    lower = np.concatenate([lower, np.zeros(m)])
    upper = np.concatenate([upper, np.full(m, np.inf)])
    x = np.concatenate([x, np.abs(resid)])
    basis = np.arange(n_std, n_std + m)
    if max_iter is None:
        max_iter = 100 * (m + n_std) + 1000

    state = _State(A, b, lower, upper, basis, x, tol)
    phase1 = np.concatenate([np.zeros(n_std), np.ones(m)])
    if m:
        state.run(phase1, max_iter)
        infeas = float(x[n_std:].sum())
        scale = max(1.0, float(np.abs(b).max()))
        if infeas > tol.primal_feasibility * scale:
            return LpSolution("infeasible", iterations=state.iterations, method="revised",
                              info={"phase1_infeasibility": infeas})
    # artificials are fixed at zero from here on
    upper[n_std:] = 0.0
    x[n_std:] = np.where(state.is_basic[n_std:], x[n_std:], 0.0)
    phase2 = np.concatenate([p.cost, np.zeros(n_std - n + m)])
    status = state.run(phase2, max_iter)
    if status == "unbounded":
        return LpSolution("unbounded", iterations=state.iterations, method="revised")
    state.refactor()
    y = phase2[state.basis] @ state.binv if m else np.zeros(0)
    xs = x[:n].copy()
    return LpSolution(
        status="optimal",
        x=xs,
        duals=y,
        objective=float(p.cost @ xs),
        reduced_costs=p.cost - y @ A0,
        iterations=state.iterations,
        method="revised",
    )


def solve_highs(p: LpProblem) -> LpSolution:
    from scipy.optimize import linprog
    from scipy.sparse import vstack

    A = p.sparse()
    senses = np.array(p.senses, dtype=object)
    le = np.flatnonzero(senses == LE)
    ge = np.flatnonzero(senses == GE)
    eq = np.flatnonzero(senses == EQ)
    a_ub = b_ub = a_eq = b_eq = None
    if le.size or ge.size:
        a_ub = vstack([A[le], -A[ge]]).tocsr()
        b_ub = np.concatenate([p.rhs[le], -p.rhs[ge]])
    if eq.size:
        a_eq = A[eq]
        b_eq = p.rhs[eq]
    bounds = np.column_stack([p.lower, p.upper])
    res = linprog(p.cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if res.status == 2:
        return LpSolution("infeasible", method="highs")
    if res.status == 3:
        return LpSolution("unbounded", method="highs")
    if res.status != 0:
        raise LpError(f"HiGHS failed: {res.message}")
    y = np.zeros(p.n_rows)
    if a_ub is not None:
        marg = res.ineqlin.marginals
        y[le] = marg[: le.size]
        y[ge] = -marg[le.size:]
    if a_eq is not None:
        y[eq] = res.eqlin.marginals
    x = np.asarray(res.x, dtype=float)
    return LpSolution(
        status="optimal",
        x=x,
        duals=y,
        objective=float(p.cost @ x),
        reduced_costs=p.cost - A.T @ y,
        iterations=int(getattr(res, "nit", 0)),
        method="highs",
    )
