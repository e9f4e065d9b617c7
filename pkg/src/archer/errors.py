"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions do not agree with what an operation expects."""


class NumericError(ArithmeticError):
    """A non-finite value showed up where only finite values are allowed."""


class ConfigError(ValueError):
    """An experiment or component configuration is invalid."""


class NotReadyError(RuntimeError):
    """The replay buffer cannot serve samples yet."""
