"""Linear programming: revised simplex, HiGHS fallback, transportation simplex."""

from __future__ import annotations

from ..errors import ConfigError
from .problem import EQ, GE, LE, TOL, LpProblem, LpSolution, Tolerances
from .simplex import solve_highs, solve_revised
from .transport import TransportSolution, solve_transportation

# dense revised simplex is used up to this many rows / columns
AUTO_MAX_ROWS = 100
AUTO_MAX_COLS = 1000


def solve_lp(problem: LpProblem, method: str = "auto", tol: Tolerances = TOL) -> LpSolution:
    """Solve ``problem``.

    ``method`` is ``"revised"`` (in-house simplex), ``"highs"`` (SciPy's
    HiGHS) or ``"auto"``, which picks the in-house solver for small problems.
    """
    if method == "auto":
        small = problem.n_rows <= AUTO_MAX_ROWS and problem.n_cols <= AUTO_MAX_COLS
        method = "revised" if small else "highs"
    if method == "revised":
        return solve_revised(problem, tol)
    if method == "highs":
        return solve_highs(problem)
    raise ConfigError(f"unknown LP method {method!r}")


__all__ = [
    "EQ", "GE", "LE", "TOL", "LpProblem", "LpSolution", "Tolerances",
    "TransportSolution", "solve_lp", "solve_transportation",
]
