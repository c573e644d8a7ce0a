"""Exception hierarchy shared by the models, services and the CLI."""
from typing import Any, Optional


class ReconstructionError(Exception):
    """Base class for every error raised by the package."""


class DomainError(ReconstructionError):
    """An argument lies outside the domain of a potential or of D."""


class DimensionError(ReconstructionError):
    """Vector or operator sizes do not match."""


class ConfigError(ReconstructionError):
    """Invalid configuration value (kernel, beta, config file key...)."""


class NumericalError(ReconstructionError):
    """Non-finite iterate, negative curvature or non-finite oracle evaluation."""


class PreconditionError(ReconstructionError):
    """A documented precondition of an oracle check does not hold."""


class GridIOError(ReconstructionError, OSError):
    """A grid file cannot be read or written."""


class FormatError(ReconstructionError):
    """Malformed CSV or PGM content."""

    def __init__(self, message: str, line: Optional[int] = None, byte: Optional[int] = None):
        self.line = line
        self.byte = byte
        position = []
        if line is not None:
            position.append(f"line {line}")
        if byte is not None:
            position.append(f"byte {byte}")
        if position:
            message = f"{message} ({', '.join(position)})"
        super().__init__(message)


class NotConverged(ReconstructionError):
    """An iteration budget was exhausted.

    The partial result travels with the exception so callers can still
    write outputs.
    """

    def __init__(self, message: str, trace: Any = None, x: Any = None, sigma: Any = None):
        super().__init__(message)
        self.trace = trace
        self.x = x
        self.sigma = sigma
