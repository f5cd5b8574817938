"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""


class SenetaError(Exception):
    exit_code = 1


class ParseError(SenetaError, ValueError):
    """Malformed spec string; ``position`` is the offending character offset."""

    def __init__(self, message, text="", position=0):
        self.text = text
        self.position = position
        if text:
            message = f"{message} at position {position} in {text!r}"
        super().__init__(message)


class DomainError(SenetaError, ValueError):
    """Argument outside the domain of an operation."""

    exit_code = 3


class HypothesisError(SenetaError):
    """A modelling hypothesis (supercriticality, non-lattice, ...) fails."""

    exit_code = 3


class ConsistencyError(SenetaError):
    exit_code = 3


class ConvergenceError(SenetaError, RuntimeError):
    """Iterative solver did not converge; ``trace`` holds its history."""

    exit_code = 2

    def __init__(self, message, trace=None):
        self.trace = list(trace or [])
        super().__init__(message)


class AccuracyError(SenetaError):
    """Discretization parameters too coarse for the requested accuracy."""

    exit_code = 1


class NoDataError(SenetaError):
    exit_code = 2
