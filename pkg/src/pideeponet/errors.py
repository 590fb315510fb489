"""Exception types raised across the package."""


class PiDeepONetError(Exception):
    """Base class for package errors."""


class ShapeError(PiDeepONetError, ValueError):
    pass


class DomainError(PiDeepONetError, ValueError):
    pass


class NonFiniteError(PiDeepONetError, FloatingPointError):
    pass


class DegenerateFieldError(PiDeepONetError, RuntimeError):
    pass


class CalibrationError(PiDeepONetError, ValueError):
    pass


class GridParseError(PiDeepONetError, ValueError):
    """Malformed grid or pairs file; ``line``/``column`` are 1-based when known."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class CheckpointError(PiDeepONetError, ValueError):
    pass


class ConfigError(PiDeepONetError, ValueError):
    pass
