"""Exception hierarchy.

Domain errors mean the caller asked for something outside the model's
definition; numerical errors mean a computation that should be well defined
failed to reach its accuracy target.
"""


class BGWError(Exception):
    pass


class DomainError(BGWError, ValueError):
    pass


class UnsupportedMeasureError(DomainError):
    pass


class NotSubcriticalError(DomainError):
    pass


class DegenerateQsdError(DomainError):
    """No quasi-stationary mass on two or more survivors."""


class InsufficientPopulationError(DomainError):
    def __init__(self, alive, k):
        super().__init__(f"need {k} extant individuals, have {alive}")
        self.alive = alive
        self.k = k


class NumericalError(BGWError, ArithmeticError):
    pass


class SolverError(NumericalError):
    def __init__(self, message, t_reached=None):
        if t_reached is not None:
            message = f"{message} (reached t={t_reached!r})"
        super().__init__(message)
        self.t_reached = t_reached


class QuadratureError(NumericalError):
    def __init__(self, message, estimate, error_bound):
        super().__init__(f"{message}: estimate={estimate!r}, error bound={error_bound!r}")
        self.estimate = estimate
        self.error_bound = error_bound


class TruncationError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    """Raised with the last iterate attached as ``last``."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class PopulationExplosionError(NumericalError):
    pass
