class DAELQRError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(DAELQRError, ValueError):
    pass


class NotNilpotentError(DAELQRError, ValueError):
    pass


class InconsistentInitialValueError(DAELQRError, ValueError):
    """The initial value (or the pair ``(x0, u)``) is not feasible.

    ``residual`` holds the distance of ``x0`` from the consistency space and
    ``failed`` lists the violated matching conditions, if any.
    """

    def __init__(self, message, residual=None, failed=()):
        super().__init__(message)
        self.residual = residual
        self.failed = list(failed)


class AssumptionError(DAELQRError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class IntegrationError(DAELQRError, RuntimeError):
    def __init__(self, message, t_fail=None):
        super().__init__(message)
        self.t_fail = t_fail


class ConvergenceError(DAELQRError, RuntimeError):
    def __init__(self, message, derivative_norm=None):
        super().__init__(message)
        self.derivative_norm = derivative_norm


class InternalConsistencyError(DAELQRError, RuntimeError):
    """Two mathematically equivalent computations disagreed.

    Indicates a tolerance pathology rather than a user error.
    """
