"""Exception hierarchy shared by the library and the command line."""


class BrcError(Exception):
    """Base class for all errors raised by brcnet."""


class ValidationError(BrcError, ValueError):
    """Input does not satisfy a documented contract (shape, state index, DAG, ...)."""


class DegenerateDistributionError(ValidationError):
    """A conditional distribution is undefined because every joint term is zero."""


class ExtractionError(ValidationError):
    """Softmax extraction hit a zero probability inside a log-ratio.

    ``cell`` is ``(variable name, row index, state index)`` of the offending entry.
    """

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class InfeasibleError(BrcError, RuntimeError):
    """A computation would exceed a configured size cap."""


class ConsistencyError(BrcError, AssertionError):
    """Two independent evaluation routes disagreed beyond tolerance."""
