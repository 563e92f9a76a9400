"""Exceptions raised across the package."""


class ErgoFixError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(ErgoFixError, ValueError):
    """Arguments of the wrong variant, size or shape."""


class DomainError(ErgoFixError, ValueError):
    """A point lies outside the domain C, or a map does not preserve C."""


class NumericError(ErgoFixError, ArithmeticError):
    """Non-finite arithmetic or a quadrature that failed to converge.

    ``trace`` holds whatever part of an iteration was completed.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class IterationLimitError(ErgoFixError, RuntimeError):
    """An inner iteration ran out of steps before meeting its tolerance."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class InfeasibleError(ErgoFixError, RuntimeError):
    """The invariant-mean linear program reported no feasible point."""


class ConfigError(ErgoFixError, ValueError):
    """An experiment config could not be parsed or validated."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column
