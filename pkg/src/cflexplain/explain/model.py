"""Configuration records, results and the per-decision objective."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import choice
from ..errors import ConfigError, InfeasibleDesiredSpace
from ..factual import FactualSolution
from ..instance import Instance, PrecomputedUtilities
from ..transport import TransportPlan, wasserstein_all


@dataclass(frozen=True)
class DesiredSpace:
    """Candidates that must be opened / must stay closed."""

    forced_open: frozenset = frozenset()
    forced_closed: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "forced_open", frozenset(int(d) for d in self.forced_open))
        object.__setattr__(self, "forced_closed", frozenset(int(d) for d in self.forced_closed))

    def validate(self, n_candidates: int, r: int) -> None:
        every = self.forced_open | self.forced_closed
        if any(d < 0 or d >= n_candidates for d in every):
            raise InfeasibleDesiredSpace(f"candidate index out of range 0..{n_candidates - 1}")
        if self.forced_open & self.forced_closed:
            raise InfeasibleDesiredSpace(
                f"candidates {sorted(self.forced_open & self.forced_closed)} are both forced open and closed"
            )
        if len(self.forced_open) > r:
            raise InfeasibleDesiredSpace(
                f"{len(self.forced_open)} forced-open candidates exceed the budget r={r}"
            )
        if n_candidates - len(self.forced_closed) < r:
            raise InfeasibleDesiredSpace(
                f"only {n_candidates - len(self.forced_closed)} candidates may open, budget is r={r}"
            )

    def contains(self, z) -> bool:
        opened = set(choice.open_set(z))
        return self.forced_open <= opened and not (self.forced_closed & opened)


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the explanation engine.

    ``alpha`` scales the factual captured demand that the explanation must
    reach, ``lam`` weighs the Wasserstein term, ``budget`` is the number of
    facilities to open. The remaining fields tune the inner solver.
    """

    alpha: float = 1.0
    lam: float = 0.0
    budget: int = 1
    epsilon: float = 1e-4
    phi_min: float = 1e-6
    multistart: int = 5
    max_iter: int = 2000
    patience: int = 100
    step_scale: float = 0.1
    step_tau: float = 100.0
    rho0: float = 10.0
    rho_growth: float = 10.0
    rho_max: float = 1e8
    tol: float = 1e-7
    time_limit: float = 3600.0
    seed: int = 0
    polish: bool = True
    weighted_wasserstein: bool = False
    support_mode: str = "aggregated"
    per_customer_cap: int = 4096

    def validate(self) -> None:
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if not self.lam >= 0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lam}")
        if not (isinstance(self.budget, (int, np.integer)) and self.budget >= 1):
            raise ConfigError(f"budget must be a positive integer, got {self.budget!r}")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not self.phi_min > 0:
            raise ConfigError("phi_min must be positive")
        if self.multistart < 0 or self.max_iter < 1:
            raise ConfigError("multistart must be >= 0 and max_iter >= 1")
        if self.support_mode not in ("aggregated", "per_customer"):
            raise ConfigError(f"unknown support mode {self.support_mode!r}")
        if not self.time_limit > 0:
            raise ConfigError("time_limit must be positive")


@dataclass
class LowerBoundResult:
    """Model-free bound on the Wasserstein term (not yet multiplied by lambda)."""

    value: float
    per_z: dict | None = None
    mode: str = "global"
    seconds: float = 0.0


@dataclass
class Explanation:
    z: np.ndarray
    phi: np.ndarray
    x: np.ndarray
    plans: list
    j_cost: float
    w_cost: float
    total: float
    q_new: float
    q_factual: float
    lower_bound: float
    gap: float
    sparsity: float
    solve_seconds: float
    p_factual: np.ndarray
    p_new: np.ndarray
    timed_out: bool = False
    warm_start_total: float = float("nan")
    warm_start_seconds: float = 0.0
    bound_seconds: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def open_set(self) -> tuple[int, ...]:
        return choice.open_set(self.z)


def target_demand(inst: Instance, factual: FactualSolution, alpha: float) -> float:
    target = alpha * factual.q_factual
    total = float(np.sum(inst.weights))
    if target >= total:
        raise ConfigError(
            f"alpha * Q_factual = {target:.6g} is not attainable (total weight {total:.6g})"
        )
    return target


class NodeObjective:
    """Objective, constraint and subgradients for one fixed decision ``z``.

    Works on the vector of phi values of the open candidates only; closed
    candidates keep their factual value.
    """

    def __init__(self, inst: Instance, pre: PrecomputedUtilities, factual: FactualSolution,
                 z, lam: float, target: float, weighted: bool = False):
        self.z = np.asarray(z, dtype=bool)
        self.open = np.flatnonzero(self.z)
        self.D = pre.n_candidates
        self.phi0_full = pre.phi0
        self.phi0 = pre.phi0[self.open]
        self.a = np.ascontiguousarray(pre.a_hat[:, self.open])
        self.b = pre.b
        self.b_sum = pre.b_sum
        self.weights = np.asarray(inst.weights, dtype=float)
        self.w_cust = self.weights if weighted else np.ones_like(self.weights)
        self.P0 = np.ascontiguousarray(factual.p0)
        self.cost = np.ascontiguousarray(pre.ground_cost)
        self.lam = float(lam)
        self.target = float(target)
        self.n_evals = 0

    @property
    def k(self) -> int:
        return self.open.size

    def full_phi(self, phi_open) -> np.ndarray:
        phi = self.phi0_full.copy()
        phi[self.open] = phi_open
        return phi

    def probs(self, phi_open) -> np.ndarray:
        att = self.a * phi_open
        s = att.sum(axis=1) + self.b_sum
        P = np.zeros((self.a.shape[0], self.D + self.b.shape[1]))
        P[:, self.open] = att / s[:, None]
        P[:, self.D:] = self.b / s[:, None]
        return P

    def demand(self, phi_open) -> float:
        A = self.a @ phi_open
        return float(self.weights @ (A / (A + self.b_sum)))

    def demand_grad(self, phi_open) -> np.ndarray:
        A = self.a @ phi_open
        s = A + self.b_sum
        return (self.weights * self.b_sum / s**2) @ self.a

    def j_cost(self, phi_open) -> float:
        return float(np.abs(phi_open - self.phi0).sum())

    def wasserstein(self, phi_open):
        """Per-customer W2^2, plans and pinned column potentials."""
        self.n_evals += 1
        return wasserstein_all(self.P0, self.probs(phi_open), self.cost, pin=self.D)

    def evaluate(self, phi_open):
        """``(J, W, grad_J, grad_W)`` at ``phi_open``; gradients are subgradients."""
        values, _, pots = self.wasserstein(phi_open)
        J = self.j_cost(phi_open)
        W = float(self.w_cust @ values)
        gJ = np.sign(phi_open - self.phi0)
        att = self.a * phi_open
        s = att.sum(axis=1) + self.b_sum
        P_open = att / s[:, None]
        P_comp = self.b / s[:, None]
        mean_pot = (pots[:, self.open] * P_open).sum(axis=1) + (pots[:, self.D:] * P_comp).sum(axis=1)
        # dW_n/dphi_d = a_nd / S_n * (pot_n[d] - <pot_n, p_n>)
        coef = self.a / s[:, None] * (pots[:, self.open] - mean_pot[:, None])
        gW = self.w_cust @ coef
        return J, W, gJ, gW

    def total(self, phi_open) -> float:
        J, W, _, _ = self.evaluate(phi_open)
        return J + self.lam * W

    def plans(self, phi_open) -> list[TransportPlan]:
        _, plans, _ = self.wasserstein(phi_open)
        return [TransportPlan(p) for p in plans]

    def repair(self, phi_open, phi_min: float) -> np.ndarray | None:
        """Smallest uniform scaling ``c >= 1`` of ``phi_open`` meeting the demand target."""
        phi = np.maximum(phi_open, phi_min)
        if self.demand(phi) >= self.target:
            return phi
        hi = 2.0
        while self.demand(phi * hi) < self.target:
            hi *= 2.0
            if hi > 1e300:
                return None
        lo = hi / 2 if hi > 2.0 else 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.demand(phi * mid) >= self.target:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-15 * hi:
                break
        return phi * hi

    def cost_lower_bound(self, refs) -> float:
        """Certified lower bound on ``J`` over the feasible set of this node.

        Demand is concave in phi, so its tangent plane at any ``ref`` bounds it
        from above; the cheapest way to lift the tangent plane to the target
        gives a lower bound on the l1 change.
        """
        best = 0.0
        for ref in refs:
            g = self.demand_grad(ref)
            gmax = g.max() if g.size else 0.0
            need = self.target - self.demand(ref) - g @ (self.phi0 - ref)
            if need <= 0:
                continue
            if gmax <= 0:
                return np.inf
            best = max(best, need / gmax)
        return best
