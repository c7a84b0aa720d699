class DriftbenchError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class InvalidInputError(DriftbenchError, ValueError):
    exit_code = 1


class FormatError(DriftbenchError):
    """A file on disk is truncated, has the wrong magic, or a bad version."""

    exit_code = 2


class NumericError(DriftbenchError, ArithmeticError):
    exit_code = 3


class GenerationError(DriftbenchError):
    exit_code = 4


class StateError(DriftbenchError, RuntimeError):
    exit_code = 1
