class FormationError(Exception):
    """Base class for errors raised by formation_flow."""


class InvalidArgumentError(FormationError, ValueError):
    pass


class InfeasibleEmbeddingError(FormationError):
    pass


class NumericalError(FormationError, ArithmeticError):
    pass


class RefinementFailedError(FormationError):
    """Newton refinement did not reach the requested gradient tolerance.

    ``best`` holds the iterate with the smallest gradient norm seen and
    ``grad_norm`` its residual.
    """

    def __init__(self, message, best, grad_norm):
        super().__init__(message)
        self.best = best
        self.grad_norm = grad_norm


class ConfigError(InvalidArgumentError):
    """Malformed scenario file."""
