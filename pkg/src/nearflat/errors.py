"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An operation was called with arguments that break its contract."""


class NotPositiveDefiniteError(ArithmeticError):
    """The rank-one metric left the positive-definite regime (||u|| too close to 1)."""


class DegenerateMetricError(ArithmeticError):
    """A grid metric became (numerically) degenerate at some point."""


class SingularityError(ArithmeticError):
    """Non-finite values appeared during flow integration."""


class ConfigError(ValueError):
    """Invalid experiment configuration (bad value, unknown key, parse failure)."""

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)
