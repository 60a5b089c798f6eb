"""Exception types shared across the package."""


class ConvexityError(ValueError):
    """Material parameters break the convexity requirements of a model."""


class SingularSystemError(RuntimeError):
    """A linear solve hit a (numerically) singular operator."""


class NonConvergenceError(RuntimeError):
    """An iterative solver exhausted its iteration budget.

    Carries enough context to diagnose the failure: the iteration count,
    the residual history and, when available, the best iterate reached.
    """

    def __init__(self, message, iterations=None, history=None, best=None):
        super().__init__(message)
        self.iterations = iterations
        self.history = history if history is not None else []
        self.best = best


class ControlFailureError(NonConvergenceError):
    """The outer load-control loop could not meet its target."""


class ConfigError(ValueError):
    """A scenario configuration failed schema validation."""
