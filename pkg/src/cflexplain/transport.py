"""Squared 2-Wasserstein distance between choice distributions.

Both distributions live on the full ordered set of alternatives; closed
candidates simply carry zero mass. The ground cost is the squared Euclidean
distance between locations (``PrecomputedUtilities.ground_cost``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LpError
from .lp.problem import TOL
from .lp.transport import _max_iter, solve_reduced, w2_batch


@dataclass(frozen=True)
class TransportPlan:
    """Coupling ``pi[c, c']`` between a factual and a counterfactual distribution."""

    pi: np.ndarray

    def row_sums(self) -> np.ndarray:
        return self.pi.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.pi.sum(axis=0)

    def cost(self, ground_cost) -> float:
        return float(np.sum(self.pi * ground_cost))


@dataclass(frozen=True)
class WassersteinResult:
    """``value`` is W2^2; ``potentials`` are optimal duals of the column marginal.

    For any distribution ``q`` on the same support,
    ``W(p0, q) >= value + potentials @ (q - p)``.
    """

    value: float
    plan: TransportPlan
    potentials: np.ndarray


def _check_distribution(p, name: str) -> np.ndarray:
    p = np.ascontiguousarray(p, dtype=float)
    if p.ndim != 1:
        raise DomainError(f"{name} must be a vector")
    if np.any(~np.isfinite(p)) or np.any(p < 0):
        raise DomainError(f"{name} must be finite and nonnegative")
    if abs(p.sum() - 1.0) > TOL.marginal_balance:
        raise DomainError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def wasserstein2(p0, p, cost, pin: int = 0) -> WassersteinResult:
    """Exact W2^2 between ``p0`` and ``p`` under the squared ground ``cost``.

    Potentials are shifted so that ``potentials[pin] == 0``; the package pins
    the first competitor.
    """
    p0 = _check_distribution(p0, "p0")
    p = _check_distribution(p, "p")
    cost = np.ascontiguousarray(cost, dtype=float)
    if p0.size != p.size or cost.shape != (p0.size, p.size):
        raise DomainError(
            f"support mismatch: p0 has {p0.size}, p has {p.size}, cost is {cost.shape}"
        )
    p = p * (p0.sum() / p.sum())
    plan, value, _, v, status = solve_reduced(p0, p, cost, _max_iter(p0.size, p.size))
    if status != 0:
        raise LpError("transportation simplex hit its iteration limit")
    return WassersteinResult(float(value), TransportPlan(plan), v - v[pin])


def wasserstein_all(P0: np.ndarray, P: np.ndarray, cost: np.ndarray, pin: int = 0):
    """Row-wise W2^2 for stacks of distributions.

    Returns ``(values, plans, potentials)`` with shapes ``(N,)``, ``(N, K, K)``
    and ``(N, K)``. Inputs are trusted (no validation); rows of ``P`` are
    rescaled to the mass of the matching row of ``P0``.
    """
    P0 = np.ascontiguousarray(P0, dtype=float)
    P = np.ascontiguousarray(P, dtype=float)
    P = P * (P0.sum(axis=1) / P.sum(axis=1))[:, None]
    K = P0.shape[1]
    values, plans, pots, status = w2_batch(
        P0, P, np.ascontiguousarray(cost, dtype=float), pin, _max_iter(K, K)
    )
    if status != 0:
        raise LpError("transportation simplex hit its iteration limit")
    return values, plans, pots


def wasserstein_sum(values, weights=None) -> float:
    """Sum of per-customer distances; unweighted unless ``weights`` is given.

    Accepts floats or :class:`WassersteinResult` objects.
    """
    vals = np.array([v.value if isinstance(v, WassersteinResult) else v for v in values], dtype=float)
    if weights is None:
        return float(vals.sum())
    return float(np.dot(np.asarray(weights, dtype=float), vals))
