"""Model-free lower bound on the Wasserstein term.

For a fixed decision, the counterfactual distributions are left free (no
logit structure): each customer's factual mass may be transported to any
open candidate or competitor, subject to the demand target and to every
open candidate receiving at least ``epsilon`` mass. Any logit-induced
solution is feasible for this LP, so its value bounds the Wasserstein part
of the explanation objective from below.
"""

from __future__ import annotations

import itertools
import time

import numpy as np

from .. import choice
from ..errors import ConfigError
from ..factual import FactualSolution
from ..instance import Instance, PrecomputedUtilities
from ..lp import EQ, GE, LpProblem, solve_lp
from .model import DesiredSpace, LowerBoundResult, SolverConfig, target_demand


def enumerate_decisions(n_candidates: int, r: int, desired: DesiredSpace) -> list[np.ndarray]:
    """All decisions opening ``r`` candidates inside the desired space, in lexicographic order."""
    forced = sorted(desired.forced_open)
    free = [d for d in range(n_candidates) if d not in desired.forced_open and d not in desired.forced_closed]
    sets = sorted(tuple(sorted(forced + list(extra)))
                  for extra in itertools.combinations(free, r - len(forced)))
    return [choice.decision(s, n_candidates) for s in sets]


def bound_lp(inst: Instance, pre: PrecomputedUtilities, factual: FactualSolution, z,
             target: float, epsilon: float, weighted: bool = False, carriers=None,
             aggregate: bool = True):
    """Build the bound LP for decision ``z``.

    Variables ``pi[n, i, j]`` move mass from factual support point ``rows[i]``
    to alternative ``cols[j]`` (open candidates, then competitors). With
    ``carriers`` (one customer per open candidate) the epsilon-support rows
    apply to that customer only, otherwise to the sum over customers.

    The per-customer validity row (total mass at most one) is implied by the
    row-sum equalities and is not added.

    Without carriers, customers sharing the same demand weight and Wasserstein
    weight enter every coupling row only through their sum, so with
    ``aggregate`` each such group is merged into one block with summed
    marginals. Splitting a group flow in proportion to each customer's factual
    mass recovers a feasible point of the same cost, so the value is unchanged.
    """
    D = pre.n_candidates
    K = pre.ground_cost.shape[0]
    src = np.flatnonzero(factual.p0.max(axis=0) > 0)
    opened = np.flatnonzero(z)
    dst = np.concatenate([opened, np.arange(D, K)])
    ni, nj = src.size, dst.size
    q = np.asarray(inst.weights, dtype=float)
    w_cust = q if weighted else np.ones_like(q)
    p0 = factual.p0[:, src]
    if aggregate and carriers is None:
        keys, group = np.unique(np.stack([q, w_cust], axis=1), axis=0, return_inverse=True)
        group = group.ravel()
        p0 = np.stack([p0[group == g].sum(axis=0) for g in range(keys.shape[0])])
        q, w_cust = keys[:, 0], keys[:, 1]
    N = p0.shape[0]
    n_var = N * ni * nj

    cost = (w_cust[:, None, None] * pre.ground_cost[np.ix_(src, dst)][None, :, :]).ravel()
    var = np.arange(n_var).reshape(N, ni, nj)

    rows, cols, vals, rhs, senses = [], [], [], [], []
    # row sums equal the factual marginals
    rows.append(np.repeat(np.arange(N * ni), nj))
    cols.append(var.ravel())
    vals.append(np.ones(n_var))
    rhs.append(p0.ravel())
    senses += [EQ] * (N * ni)
    r0 = N * ni
    # demand target on mass reaching open candidates
    k = opened.size
    dem = var[:, :, :k].ravel()
    rows.append(np.full(dem.size, r0))
    cols.append(dem)
    vals.append(np.repeat(q, ni * k))
    rhs.append([target])
    senses.append(GE)
    r0 += 1
    # epsilon support on every open candidate
    for j in range(k):
        if carriers is None:
            sel = var[:, :, j].ravel()
        else:
            sel = var[carriers[j], :, j].ravel()
        rows.append(np.full(sel.size, r0 + j))
        cols.append(sel)
        vals.append(np.ones(sel.size))
    rhs.append(np.full(k, epsilon))
    senses += [GE] * k

    lp = LpProblem(
        cost=cost,
        rows=np.concatenate(rows),
        cols=np.concatenate(cols),
        vals=np.concatenate(vals),
        senses=senses,
        rhs=np.concatenate([np.asarray(r, dtype=float).ravel() for r in rhs]),
    )
    return lp, (src, dst)


def _identity_feasible(factual: FactualSolution, z, cfg: SolverConfig, target: float) -> bool:
    """Whether leaving every customer's distribution unchanged satisfies the bound LP.

    Then the optimum is exactly zero and the LP, which would return it only up
    to rounding, is skipped.
    """
    z = np.asarray(z, dtype=bool)
    if not np.array_equal(z, factual.z0) or target > factual.q_factual:
        return False
    mass = factual.p0[:, np.flatnonzero(z)]
    if cfg.support_mode == "aggregated":
        return bool(np.all(mass.sum(axis=0) >= cfg.epsilon))
    return bool(np.all(mass.max(axis=0) >= cfg.epsilon))


def decision_bound(inst, pre, factual, z, cfg: SolverConfig, target: float, lp_method: str = "auto") -> float:
    """Bound for one decision; ``inf`` if the LP is infeasible."""
    if _identity_feasible(factual, z, cfg, target):
        return 0.0
    if cfg.support_mode == "aggregated":
        carrier_sets = [None]
    else:
        N, k = factual.p0.shape[0], int(np.sum(z))
        if N**k > cfg.per_customer_cap:
            raise ConfigError(
                f"per-customer support mode needs {N}^{k} LPs, above the cap {cfg.per_customer_cap}"
            )
        carrier_sets = itertools.product(range(N), repeat=k)
    best = np.inf
    for carriers in carrier_sets:
        lp, _ = bound_lp(inst, pre, factual, z, target, cfg.epsilon, cfg.weighted_wasserstein, carriers)
        sol = solve_lp(lp, method=lp_method)
        if sol.optimal:
            best = min(best, max(0.0, sol.objective))
    return best


def model_free_bound(inst: Instance, pre: PrecomputedUtilities, factual: FactualSolution,
                     desired: DesiredSpace, cfg: SolverConfig, z=None,
                     decisions=None) -> LowerBoundResult:
    """Model-free bound for one decision ``z`` or the minimum over the desired space."""
    t0 = time.perf_counter()
    cfg.validate()
    desired.validate(pre.n_candidates, cfg.budget)
    target = target_demand(inst, factual, cfg.alpha)
    if z is not None:
        z = np.asarray(z, dtype=bool)
        value = decision_bound(inst, pre, factual, z, cfg, target)
        return LowerBoundResult(value, {choice.open_set(z): value}, "per_decision",
                                time.perf_counter() - t0)
    if decisions is None:
        decisions = enumerate_decisions(pre.n_candidates, cfg.budget, desired)
    per_z = {choice.open_set(d): decision_bound(inst, pre, factual, d, cfg, target) for d in decisions}
    value = min(per_z.values())
    return LowerBoundResult(value, per_z, "global", time.perf_counter() - t0)
