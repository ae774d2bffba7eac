"""Factual facility location: choose ``r`` candidates maximising captured demand.

Two independent solvers are provided: exhaustive enumeration of the
``C(D, r)`` open sets, and LP-based branch-and-bound on a linear
reformulation of the logit MILP with variables ``w[n, d]`` (probability of
choosing candidate ``d``) and ``w_hat[n]`` (total competitor probability).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import choice
from .errors import ConfigError, EnumerationCapExceeded
from .instance import Instance, PrecomputedUtilities
from .lp import LE, EQ, TOL, LpProblem, LpSolution, solve_lp

ENUMERATION_CAP = 2_000_000
_CHUNK = 4096


@dataclass
class FactualSolution:
    z0: np.ndarray
    p0: np.ndarray
    q_factual: float
    method: str
    info: dict = field(default_factory=dict)

    @property
    def open_set(self) -> tuple[int, ...]:
        return choice.open_set(self.z0)


def _check_budget(pre: PrecomputedUtilities, r: int) -> None:
    D = pre.n_candidates
    if not (1 <= r <= D):
        raise ConfigError(f"budget r={r} must satisfy 1 <= r <= {D}")


def _finish(inst, pre, z, method, info) -> FactualSolution:
    p0 = choice.probabilities(pre.phi0, z, pre)
    q = choice.captured_demand(pre.phi0, z, pre, inst.weights)
    return FactualSolution(z0=z, p0=p0, q_factual=q, method=method, info=info)


def solve_factual_enumerate(inst: Instance, pre: PrecomputedUtilities, r: int,
                            cap: int = ENUMERATION_CAP) -> FactualSolution:
    """Globally optimal decision by enumeration; ties go to the lexicographically smallest open set."""
    _check_budget(pre, r)
    D = pre.n_candidates
    total = math.comb(D, r)
    if total > cap:
        raise EnumerationCapExceeded(
            f"C({D}, {r}) = {total} subsets exceeds the cap {cap}; use solve_factual_haase"
        )
    att = pre.a_hat * pre.phi0  # (N, D)
    w = np.asarray(inst.weights, dtype=float)
    best_q = -np.inf
    best_set = None
    combos = itertools.combinations(range(D), r)
    while True:
        chunk = list(itertools.islice(combos, _CHUNK))
        if not chunk:
            break
        idx = np.array(chunk, dtype=np.int64)
        a = att[:, idx].sum(axis=2)  # (N, chunk)
        q = w @ (a / (a + pre.b_sum[:, None]))
        k = int(np.argmax(q))
        # strict improvement keeps the earliest (lexicographically smallest) set on ties
        if best_set is None or q[k] > best_q + 1e-12 * max(1.0, abs(best_q)):
            first = int(np.flatnonzero(q >= q[k] - 1e-12 * max(1.0, abs(q[k])))[0])
            best_q = q[first]
            best_set = chunk[first]
    z = choice.decision(best_set, D)
    return _finish(inst, pre, z, "enumeration", {"subsets": total})


# -- Haase reformulation -------------------------------------------------------

def haase_lp(pre: PrecomputedUtilities, weights, r: int, z_lower=None, z_upper=None) -> LpProblem:
    """LP relaxation of the Haase MILP with ``z`` bounded by ``[z_lower, z_upper]``.

    Variable layout: ``w[n, d]`` at ``n*D + d``, ``w_hat[n]`` at ``N*D + n``,
    ``z[d]`` at ``N*D + N + d``. The objective is the negated captured demand.
    """
    N, D = pre.a_hat.shape
    a = pre.a_hat * pre.phi0
    b = pre.b_sum
    nw = N * D
    iz = nw + N
    n_var = iz + D
    cost = np.zeros(n_var)
    cost[:nw] = -np.repeat(np.asarray(weights, dtype=float), D)

    nn, dd = np.divmod(np.arange(nw), D)
    rows, cols, vals = [], [], []
    # ŵ_n + Σ_d w_nd <= 1
    rows += [nn, np.arange(N)]
    cols += [np.arange(nw), nw + np.arange(N)]
    vals += [np.ones(nw), np.ones(N)]
    # (a_nd + b_n) w_nd - a_nd z_d <= 0
    r0 = N
    rows += [r0 + np.arange(nw), r0 + np.arange(nw)]
    cols += [np.arange(nw), iz + dd]
    vals += [(a + b[:, None]).ravel(), -a.ravel()]
    # w_nd - (a_nd / b_n) ŵ_n <= 0
    r1 = N + nw
    rows += [r1 + np.arange(nw), r1 + np.arange(nw)]
    cols += [np.arange(nw), nw + nn]
    vals += [np.ones(nw), -(a / b[:, None]).ravel()]
    # Σ z = r
    r2 = N + 2 * nw
    rows += [np.full(D, r2)]
    cols += [iz + np.arange(D)]
    vals += [np.ones(D)]

    lower = np.zeros(n_var)
    upper = np.full(n_var, np.inf)
    lower[iz:] = 0.0 if z_lower is None else np.asarray(z_lower, dtype=float)
    upper[iz:] = 1.0 if z_upper is None else np.asarray(z_upper, dtype=float)
    return LpProblem(
        cost=cost,
        rows=np.concatenate(rows),
        cols=np.concatenate(cols),
        vals=np.concatenate(vals),
        senses=[LE] * (N + 2 * nw) + [EQ],
        rhs=np.concatenate([np.ones(N), np.zeros(2 * nw), [float(r)]]),
        lower=lower,
        upper=upper,
    )


def split_haase(sol: LpSolution, N: int, D: int):
    """``(w, w_hat, z)`` views of a Haase LP solution vector."""
    x = sol.x
    return x[: N * D].reshape(N, D), x[N * D: N * D + N], x[N * D + N:]


@dataclass
class _Node:
    lower: np.ndarray
    upper: np.ndarray
    bound: float
    z: np.ndarray
    depth: int


def solve_factual_haase(inst: Instance, pre: PrecomputedUtilities, r: int,
                        node_limit: int = 10_000, lp_method: str = "auto") -> FactualSolution:
    """Branch-and-bound on the Haase MILP.

    Branches on the most fractional ``z_d`` and explores depth first; the two
    children of a node are solved eagerly and the one with the better bound
    is explored first. On hitting ``node_limit`` the incumbent is returned
    with its optimality gap in ``info``.
    """
    _check_budget(pre, r)
    N, D = pre.a_hat.shape
    weights = np.asarray(inst.weights, dtype=float)
    tol_int = TOL.integrality

    def relax(lo, hi):
        sol = solve_lp(haase_lp(pre, weights, r, lo, hi), method=lp_method)
        if not sol.optimal:
            return None
        _, _, z = split_haase(sol, N, D)
        return -sol.objective, np.clip(z, 0.0, 1.0)

    def exact(open_idx) -> float:
        return choice.captured_demand(pre.phi0, choice.decision(open_idx, D), pre, weights)

    def rounded(z, lo, hi) -> tuple[int, ...]:
        fixed = set(np.flatnonzero(lo > 0.5))
        free = [d for d in np.argsort(-z, kind="stable") if d not in fixed and hi[d] > 0.5]
        return tuple(sorted(fixed | set(free[: r - len(fixed)])))

    best_q, best_set = -np.inf, None

    def offer(cand: tuple[int, ...]):
        nonlocal best_q, best_set
        if len(cand) != r:
            return
        q = exact(cand)
        if best_set is None or q > best_q + 1e-12 * max(1.0, abs(best_q)) or (
            abs(q - best_q) <= 1e-12 * max(1.0, abs(best_q)) and cand < best_set
        ):
            best_q, best_set = q, cand

    lo0, hi0 = np.zeros(D), np.ones(D)
    root = relax(lo0, hi0)
    root_bound = root[0]
    stack = [_Node(lo0, hi0, root[0], root[1], 0)]
    nodes = 0
    open_bounds: list[float] = []
    hit_limit = False

    def prunable(bound: float) -> bool:
        if best_set is None:
            return False
        return bound <= best_q + TOL.relative_gap * max(1.0, abs(best_q))

    while stack:
        node = stack.pop()
        if prunable(node.bound):
            continue
        if nodes >= node_limit:
            hit_limit = True
            open_bounds = [node.bound] + [n.bound for n in stack]
            break
        nodes += 1
        offer(rounded(node.z, node.lower, node.upper))
        frac = np.abs(node.z - np.round(node.z))
        if frac.max() <= tol_int:
            offer(tuple(int(d) for d in np.flatnonzero(node.z > 0.5)))
            continue
        d = int(np.argmin(np.where(frac > tol_int, np.abs(node.z - 0.5), np.inf)))
        children = []
        for val in (0.0, 1.0):
            lo, hi = node.lower.copy(), node.upper.copy()
            lo[d] = hi[d] = val
            res = relax(lo, hi)
            if res is not None and not prunable(res[0]):
                children.append(_Node(lo, hi, res[0], res[1], node.depth + 1))
        children.sort(key=lambda c: c.bound)  # best bound popped first
        stack.extend(children)

    z = choice.decision(best_set, D)
    info = {"nodes": nodes, "root_bound": root_bound, "node_limit_hit": hit_limit}
    if hit_limit:
        ub = max(open_bounds + [best_q])
        info["gap"] = (ub - best_q) / max(abs(best_q), 1e-12)
    else:
        info["gap"] = 0.0
    return _finish(inst, pre, z, "haase_bnb", info)


def solve_factual(inst: Instance, pre: PrecomputedUtilities, r: int, method: str = "enumeration") -> FactualSolution:
    if method == "enumeration":
        return solve_factual_enumerate(inst, pre, r)
    if method == "haase_bnb":
        return solve_factual_haase(inst, pre, r)
    raise ConfigError(f"unknown factual method {method!r}")
