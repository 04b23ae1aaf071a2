"""Exception hierarchy shared by all modules.

The CLI maps :class:`DomainError` (and subclasses) to exit code 1 and
:class:`NumericError` to exit code 2.
"""


class DiqkdError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DiqkdError, ValueError):
    """An argument lies outside the domain of the operation."""


class ParseError(DomainError):
    """An input file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(DomainError):
    """An input file parsed but violates the expected schema or invariants."""


class InsufficientDataError(DomainError):
    """A required cell of a correlation table is empty."""

    def __init__(self, cell):
        self.cell = cell
        super().__init__(f"no rounds recorded for setting cell (x={cell[0]}, y={cell[1]})")


class UndefinedWindowError(DomainError):
    """The acceptance window accepts no two-photon events at all."""


class NoViolationError(DomainError):
    """CHSH value does not exceed the local bound of 2."""


class SupraQuantumError(DomainError):
    """CHSH value exceeds the Tsirelson bound 2*sqrt(2)."""


class NoPositiveKeyError(DomainError):
    """The rate function is not positive where a key is required."""


class LinkTimeoutError(DomainError):
    """The link simulation made no progress within the attempt cap."""


class AbortedRunError(DiqkdError):
    """A protocol run stopped early; ``ledger`` holds the rounds completed so far."""

    def __init__(self, message, ledger):
        self.ledger = ledger
        super().__init__(message)


class NumericError(DiqkdError, ArithmeticError):
    """An iterative numerical routine failed to converge."""
