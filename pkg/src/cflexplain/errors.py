"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration values (sizes, tolerances, budgets)."""


class InstanceParseError(ValueError):
    """Malformed instance file. ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class InfeasibleDesiredSpace(ValueError):
    """The desired space cannot be met under the budget."""


class EnumerationCapExceeded(RuntimeError):
    """Too many decisions to enumerate; use the branch-and-bound solver."""


class LpError(RuntimeError):
    """Numerical failure inside the LP solver."""
