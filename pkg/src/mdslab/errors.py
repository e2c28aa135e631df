"""Exception types raised across the package."""


class MdsLabError(Exception):
    pass


class NotPositiveDefinite(MdsLabError, ValueError):
    pass


class NotPSD(MdsLabError, ValueError):
    pass


class InvalidInput(MdsLabError, ValueError):
    pass


class InvalidSpec(MdsLabError, ValueError):
    """A generator or chain specification violates its preconditions."""


class InvalidRegime(InvalidSpec):
    """The lower-bound construction is ill-defined for the requested horizon."""


class NoUniqueStationary(InvalidSpec):
    pass


class QuadratureFailure(MdsLabError, RuntimeError):
    pass


class ConfigError(MdsLabError, ValueError):
    """Experiment configuration is malformed; ``line`` points into the JSON source when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
