"""Exception hierarchy shared by all solver modules."""


class OCPError(Exception):
    """Base class for every error raised by lagocp."""


class DimensionError(OCPError, ValueError):
    pass


class SingularityError(OCPError, ArithmeticError):
    """Force field evaluated at a singular configuration."""


class ConvergenceError(OCPError):
    """An iterative solve stopped before reaching its tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class IntegrationError(OCPError):
    """Trajectory integration produced a non-finite value."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ConfigError(OCPError, ValueError):
    pass
