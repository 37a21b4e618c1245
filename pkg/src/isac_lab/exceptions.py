"""Exception types raised across the toolkit."""


class InvalidArgumentError(ValueError):
    """An argument violates an operation's preconditions."""


class NumericError(ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class ConfigError(ValueError):
    """A scenario or radar configuration document failed validation."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
