"""Exception types shared across the package."""


class NumericalDegeneracyError(ValueError):
    """A matrix factorization failed beyond the tolerated floating-point slack.

    The offending matrix is attached as ``matrix`` for post-mortem inspection.
    """

    def __init__(self, message, matrix=None):
        super().__init__(message)
        self.matrix = matrix


class ResourceLimitError(RuntimeError):
    """Predicted work exceeds the configured ceiling (CLI exit code 3)."""


class ConfigError(ValueError):
    """Malformed experiment configuration (CLI exit code 2).

    ``anchor`` points at the offending location: a ``line:col`` pair for
    syntax errors, a JSON path like ``$.reference.M`` otherwise.
    """

    def __init__(self, message, anchor=None):
        self.anchor = anchor
        super().__init__(f"{anchor}: {message}" if anchor else message)
