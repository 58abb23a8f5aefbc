"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or inconsistent model parameters."""


class ParseError(ValueError):
    """Malformed input file; the message names the offending line."""


class MissingHistoryError(ValueError):
    """A routing evaluation was requested before enough history exists."""


class IdentifiabilityError(ValueError):
    """Least-squares regressor is rank deficient; message names the collinear basis."""


class ConvergenceError(RuntimeError):
    """Iterative solver failed to converge. Carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class InfeasiblePlanError(RuntimeError):
    """No feasible plan found within the iteration budget.

    Carries the least-infeasible plan found so far and its violation report.
    """

    def __init__(self, message: str, best_result=None):
        super().__init__(message)
        self.best_result = best_result
