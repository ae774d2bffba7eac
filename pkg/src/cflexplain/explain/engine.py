"""Outer search over decisions in the desired space.

Each decision is a node; its continuous subproblem is solved by
:func:`inner_solve`. Nodes are visited warm-start first, then by increasing
certified bound, and a node is skipped when its bound cannot beat the
incumbent.
"""

from __future__ import annotations

import time

import numpy as np

from .. import choice
from ..errors import ConfigError
from ..factual import FactualSolution
from ..instance import Instance, PrecomputedUtilities
from ..transport import wasserstein2, wasserstein_sum
from .bound import enumerate_decisions, model_free_bound
from .inner import inner_solve
from .model import DesiredSpace, Explanation, LowerBoundResult, NodeObjective, SolverConfig, target_demand
from .warmstart import scale_to_target, start_mask, warm_start

SPARSITY_TOL = 1e-6
_TIE = 1e-9


def _better(total, key, best_total, best_key) -> bool:
    band = _TIE * max(1.0, abs(best_total))
    return total < best_total - band or (abs(total - best_total) <= band and key < best_key)


def explain(inst: Instance, pre: PrecomputedUtilities, factual: FactualSolution,
            desired: DesiredSpace, cfg: SolverConfig, bound: LowerBoundResult | None = None) -> Explanation:
    """Cheapest change of attractiveness and decision reaching the demand target inside ``desired``.

    ``bound`` may pass a global :func:`model_free_bound` computed earlier for
    the same instance, desired space, ``alpha`` and ``epsilon``; it does not
    depend on ``lam``.
    """
    cfg.validate()
    D = pre.n_candidates
    desired.validate(D, cfg.budget)
    target = target_demand(inst, factual, cfg.alpha)

    ws = warm_start(inst, pre, factual, desired, cfg)
    decisions = enumerate_decisions(D, cfg.budget, desired)
    lb = bound if bound is not None else model_free_bound(inst, pre, factual, desired, cfg, decisions=decisions)
    if lb.per_z is None or any(choice.open_set(z) not in lb.per_z for z in decisions):
        raise ConfigError("the supplied bound does not cover every decision in the desired space")

    t0 = time.perf_counter()
    deadline = t0 + cfg.time_limit
    ws_key = choice.open_set(ws.z)
    best_total, best_key, best_phi = ws.total, ws_key, ws.phi.copy()

    nodes = []
    for idx, z in enumerate(decisions):
        key = choice.open_set(z)
        obj = NodeObjective(inst, pre, factual, z, cfg.lam, target, cfg.weighted_wasserstein)
        start, _ = scale_to_target(obj, start_mask(obj, desired))
        if start is None:
            continue
        node_bound = obj.cost_lower_bound([obj.phi0, start]) + cfg.lam * lb.per_z[key]
        nodes.append((key != ws_key, node_bound, key, idx, obj, start))
    nodes.sort(key=lambda t: t[:3])

    explored = pruned = 0
    timed_out = False
    for _, node_bound, key, idx, obj, start in nodes:
        if time.perf_counter() > deadline:
            timed_out = True
            break
        if node_bound >= best_total - _TIE * max(1.0, abs(best_total)) and key != ws_key:
            pruned += 1
            continue
        res = inner_solve(obj, cfg, start, rng=np.random.default_rng([cfg.seed, idx]), deadline=deadline)
        explored += 1
        if res.feasible and _better(res.total, key, best_total, best_key):
            best_total, best_key, best_phi = res.total, key, obj.full_phi(res.phi)
        if time.perf_counter() > deadline:
            timed_out = True
            break
    solve_seconds = time.perf_counter() - t0

    z = choice.decision(best_key, D)
    phi = best_phi
    weights = np.asarray(inst.weights, dtype=float)
    P = choice.probabilities(phi, z, pre)
    results = [wasserstein2(factual.p0[n], P[n], pre.ground_cost, pin=D) for n in range(P.shape[0])]
    w_cost = wasserstein_sum([r.value for r in results], weights if cfg.weighted_wasserstein else None)
    j_cost = float(np.abs(phi - pre.phi0).sum())
    total = j_cost + cfg.lam * w_cost
    lower = cfg.lam * lb.value
    combined = min((n[1] for n in nodes), default=np.inf)
    return Explanation(
        z=z,
        phi=phi,
        x=choice.recover(phi),
        plans=[r.plan for r in results],
        j_cost=j_cost,
        w_cost=w_cost,
        total=total,
        q_new=choice.captured_demand(phi, z, pre, weights),
        q_factual=factual.q_factual,
        lower_bound=lower,
        gap=(total - lower) / max(total, 1e-12),
        sparsity=sparsity(phi, pre.phi0),
        solve_seconds=solve_seconds,
        p_factual=factual.p0,
        p_new=P,
        timed_out=timed_out,
        warm_start_total=ws.total,
        warm_start_seconds=ws.seconds,
        bound_seconds=lb.seconds,
        info={
            "nodes": len(decisions),
            "explored": explored,
            "pruned": pruned,
            "target": target,
            "bound_per_decision": {",".join(map(str, k)): v for k, v in lb.per_z.items()},
            "combined_bound": min(combined, total),
        },
    )


def sparsity(phi, phi0) -> float:
    """Share of candidates whose attractiveness changed."""
    diff = np.abs(np.asarray(phi) - np.asarray(phi0))
    return float(np.mean(diff > SPARSITY_TOL))


def metrics(expl: Explanation, inst: Instance, pre: PrecomputedUtilities) -> dict:
    """Reporting record with the captured demand recomputed from the instance."""
    return {
        "q_factual": expl.q_factual,
        "q_new": choice.captured_demand(expl.phi, expl.z, pre, inst.weights),
        "w2": expl.w_cost,
        "sparsity": sparsity(expl.phi, pre.phi0),
        "time_s": expl.solve_seconds,
        "total": expl.total,
        "gap": expl.gap,
        "timed_out": expl.timed_out,
    }
