"""Exception hierarchy.  Each class carries the process exit code the CLI uses."""


class MfmError(Exception):
    exit_code = 1


class ConfigError(MfmError, ValueError):
    exit_code = 2


class DataFormatError(MfmError, ValueError):
    exit_code = 3

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DimensionError(MfmError, ValueError):
    exit_code = 3


class NotPositiveDefiniteError(MfmError, ValueError):
    exit_code = 4


class SeriesConvergenceError(MfmError, ArithmeticError):
    exit_code = 4


class StaleCacheError(MfmError, RuntimeError):
    exit_code = 5


class SamplerError(MfmError, RuntimeError):
    """Failure inside a chain, tagged with the sweep where it happened."""

    exit_code = 4

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
        self.iteration = iteration
