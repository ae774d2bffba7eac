"""Greedy constructive starting point for the explanation search."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .. import choice
from ..factual import FactualSolution
from ..instance import Instance, PrecomputedUtilities
from .model import DesiredSpace, NodeObjective, SolverConfig, target_demand


@dataclass
class WarmStart:
    z: np.ndarray
    phi: np.ndarray
    scale: float
    j_cost: float
    w_cost: float
    total: float
    q: float
    seconds: float


def facility_ranking(inst: Instance, pre: PrecomputedUtilities, factual: FactualSolution) -> list[int]:
    """Candidates by decreasing factual captured demand.

    Candidates closed in the factual solution capture nothing; among them the
    demand each would capture if opened alone breaks the tie, then the index.
    """
    factual_share = choice.facility_demand(pre.phi0, factual.z0, pre, inst.weights)
    att = pre.a_hat * pre.phi0
    alone = inst.weights @ (att / (att + pre.b_sum[:, None]))
    return sorted(range(pre.n_candidates), key=lambda d: (-factual_share[d], -alone[d], d))


def scale_to_target(obj: NodeObjective, mask: np.ndarray, tol: float = 1e-14):
    """Scale ``phi0`` on ``mask`` (positions among open candidates) by the smallest ``c >= 1``
    reaching the demand target, by doubling then bisection.

    Returns ``(phi_open, c)``.
    """
    mask = np.asarray(mask, dtype=bool)

    def at(c):
        phi = obj.phi0.copy()
        phi[mask] *= c
        return phi

    if obj.demand(at(1.0)) >= obj.target:
        return at(1.0), 1.0
    if not mask.any():
        return None, np.inf
    hi = 2.0
    while obj.demand(at(hi)) < obj.target:
        hi *= 2.0
        if hi > 1e300:
            return None, np.inf
    lo = hi / 2.0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if obj.demand(at(mid)) >= obj.target:
            hi = mid
        else:
            lo = mid
    return at(hi), hi


def warm_decision(inst, pre, factual, desired: DesiredSpace, r: int) -> np.ndarray:
    chosen = set(desired.forced_open)
    for d in facility_ranking(inst, pre, factual):
        if len(chosen) >= r:
            break
        if d not in chosen and d not in desired.forced_closed:
            chosen.add(d)
    return choice.decision(chosen, pre.n_candidates)


def start_mask(obj: NodeObjective, desired: DesiredSpace) -> np.ndarray:
    """Open candidates whose attractiveness is scaled: the forced ones, else all."""
    mask = np.isin(obj.open, sorted(desired.forced_open))
    return mask if mask.any() else np.ones(obj.k, dtype=bool)


def warm_start(inst: Instance, pre: PrecomputedUtilities, factual: FactualSolution,
               desired: DesiredSpace, cfg: SolverConfig) -> WarmStart:
    t0 = time.perf_counter()
    cfg.validate()
    desired.validate(pre.n_candidates, cfg.budget)
    target = target_demand(inst, factual, cfg.alpha)
    z = warm_decision(inst, pre, factual, desired, cfg.budget)
    obj = NodeObjective(inst, pre, factual, z, cfg.lam, target, cfg.weighted_wasserstein)
    phi_open, c = scale_to_target(obj, start_mask(obj, desired))
    J, W, _, _ = obj.evaluate(phi_open)
    return WarmStart(
        z=z,
        phi=obj.full_phi(phi_open),
        scale=c,
        j_cost=J,
        w_cost=W,
        total=J + cfg.lam * W,
        q=obj.demand(phi_open),
        seconds=time.perf_counter() - t0,
    )
