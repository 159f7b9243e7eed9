from typing import Optional


class BinomialCarError(Exception):
    pass


class InputError(BinomialCarError, ValueError):
    """Invalid or malformed input. `line` is the 1-based source line when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GraphError(InputError):
    pass


class CountsError(InputError):
    pass


class FitError(BinomialCarError, RuntimeError):
    pass


class NonFiniteDensityError(FitError):
    def __init__(self, message: str, iteration: Optional[int] = None):
        self.iteration = iteration
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)


class SupportError(FitError):
    pass


class ConstraintError(FitError):
    pass


class OutputError(BinomialCarError, OSError):
    """A result file could not be written."""
