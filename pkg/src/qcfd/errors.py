"""Exception hierarchy shared by all qcfd modules."""


class QcfdError(Exception):
    """Base class for every error raised by qcfd."""


class ValidationError(QcfdError, ValueError):
    """Malformed input: bad shapes, non-unitary gates, invalid parameters."""


class CapacityError(QcfdError, MemoryError):
    """Requested register exceeds what the simulator will allocate."""


class NumericalError(QcfdError, ArithmeticError):
    """A numerical routine failed or produced non-finite values."""


class ConditionNumberError(NumericalError):
    """Linear system is singular or too ill-conditioned to solve."""


class SingularityError(NumericalError):
    """Closed-form solution hits a pole (finite-time blow-up)."""


class OptimizationError(NumericalError):
    """Optimizer met a non-finite cost; ``trace`` holds progress so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
