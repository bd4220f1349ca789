class MdpValidationError(ValueError):
    """An MDP or policy table violates a structural invariant."""


class ConvergenceError(RuntimeError):
    """An iterative evaluation did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UndefinedMetricError(ValueError):
    """A metric was requested on input too short to define it."""
