from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError

LE, EQ, GE = "<=", "==", ">="


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used by every solver in the package."""

    marginal_balance: float = 1e-10
    primal_feasibility: float = 1e-9
    dual_feasibility: float = 1e-9
    pivot: float = 1e-11
    integrality: float = 1e-6
    relative_gap: float = 1e-7


TOL = Tolerances()


@dataclass
class LpProblem:
    """``min c @ x`` subject to sparse rows ``A x (<=|==|>=) rhs`` and bounds.

    The constraint matrix is given as triplets ``(rows[k], cols[k], vals[k])``;
    duplicate entries are summed. Lower bounds must be finite, upper bounds
    may be ``inf``.
    """

    cost: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    senses: list
    rhs: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float)
        n = self.cost.size
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.vals = np.asarray(self.vals, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.senses = list(self.senses)
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        m = self.rhs.size
        if not (self.rows.size == self.cols.size == self.vals.size):
            raise ConfigError("triplet arrays must have equal length")
        if len(self.senses) != m:
            raise ConfigError("one sense per row required")
        if any(s not in (LE, EQ, GE) for s in self.senses):
            raise ConfigError(f"row senses must be one of {LE!r}, {EQ!r}, {GE!r}")
        if self.rows.size and (self.rows.min() < 0 or self.rows.max() >= m):
            raise ConfigError("row index out of range")
        if self.cols.size and (self.cols.min() < 0 or self.cols.max() >= n):
            raise ConfigError("column index out of range")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ConfigError("bounds must have one entry per variable")
        if not np.all(np.isfinite(self.lower)):
            raise ConfigError("lower bounds must be finite")
        if np.any(self.lower > self.upper):
            raise ConfigError("lower bound exceeds upper bound")

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    @property
    def n_cols(self) -> int:
        return self.cost.size

    def dense(self) -> np.ndarray:
        a = np.zeros((self.n_rows, self.n_cols))
        np.add.at(a, (self.rows, self.cols), self.vals)
        return a

    def sparse(self):
        from scipy.sparse import coo_matrix

        return coo_matrix(
            (self.vals, (self.rows, self.cols)), shape=(self.n_rows, self.n_cols)
        ).tocsr()


@dataclass
class LpSolution:
    """Result of :func:`solve_lp`.

    ``duals[i]`` is the sensitivity of the optimal value to ``rhs[i]``
    (so ``<=`` rows carry nonpositive and ``>=`` rows nonnegative duals).
    ``reduced_costs`` is ``cost - A.T @ duals``.
    """

    status: str
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = float("nan")
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    method: str = ""
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"
