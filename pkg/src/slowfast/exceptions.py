"""Exception types raised across the package."""


class SlowFastError(Exception):
    """Base class for all errors raised by slowfast."""


class SemigroupOverflow(SlowFastError, FloatingPointError):
    pass


class OutsideBallError(SlowFastError, ValueError):
    """A state lies outside the ball on which the nonlinearity is defined."""


class QuotientUndefined(SlowFastError, ValueError):
    pass


class NotDecayedError(SlowFastError, ValueError):
    pass


class DegenerateConstants(SlowFastError, ValueError):
    pass


class ConstructionError(SlowFastError, RuntimeError):
    """The fixed-point construction of a fast solution failed."""


class ConfigError(SlowFastError, ValueError):
    """Invalid experiment configuration; ``path`` names the offending key."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
