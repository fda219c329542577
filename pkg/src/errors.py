"""Exception hierarchy shared by every module.

Each exception carries a message, the process exit code the CLI should use,
and an optional ``data`` payload with machine-readable context.
"""

from typing import Any, Dict, Optional


class LarssonError(Exception):
    """
    Base class for errors raised by the library.

    ``data`` is not printed by the CLI but is written to the error JSON,
    making it the place for offending values and intermediate results.
    """

    exit_code = 1

    def __init__(
        self, message: str, exit_code: Optional[int] = None, data: Optional[Any] = None
    ) -> None:
        """Initialize a new LarssonError."""
        Exception.__init__(self, message)
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code
        self.data = data

    def to_dict(self) -> Dict[str, Any]:
        """Convert the error to a dict for serialization."""
        rv: Dict[str, Any] = dict()
        rv["error"] = type(self).__name__
        rv["message"] = self.message
        rv["exit_code"] = self.exit_code
        if self.data is not None:
            rv["data"] = self.data
        return rv


class ConfigError(LarssonError):
    """Invalid input or configuration."""

    exit_code = 2


class InvalidParams(ConfigError):
    pass


class ParseError(ConfigError):
    pass


class EpsilonTooLarge(ConfigError):
    pass


class StepTooCoarse(ConfigError):
    pass


class KTooLarge(ConfigError):
    pass


class UnknownCommand(ConfigError):
    pass


class DepthExceeded(ConfigError):
    pass


class XOutsideT(ConfigError):
    pass


class BadIndex(ConfigError):
    pass


class MissingData(ConfigError):
    pass


class SubdivisionOverflow(ConfigError):
    pass


class NumericalError(LarssonError):
    """A numerical procedure failed to converge or produced a vacuous result."""

    exit_code = 3


class NoConvergence(NumericalError):
    pass


class ReducibleKernel(NumericalError):
    pass


class DivergentBound(NumericalError):
    pass


class InvariantViolation(LarssonError):
    """A structural invariant failed at runtime."""

    exit_code = 4


class InternalInconsistency(InvariantViolation):
    pass


class NotPositiveBy64(InvariantViolation):
    pass
