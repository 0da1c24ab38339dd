"""
errors.py - Exception hierarchy for PhotOptix

Each exception class carries the CLI exit code it maps to, so the command-line
front end can translate any library failure into exactly one documented code.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_SIZE = 3
EXIT_NUMERIC = 4
EXIT_ORACLE_MISMATCH = 5


class PhotoptixError(Exception):
    """Base class for all library errors."""

    exit_code = EXIT_USAGE


class ValidationError(PhotoptixError, ValueError):
    """An input violates a documented invariant."""

    exit_code = EXIT_VALIDATION


class DimensionError(ValidationError):
    """Shapes or lengths of inputs do not agree."""


class PatternMismatchError(DimensionError):
    """Row and column occupation totals differ."""


class CutoffError(ValidationError):
    """A Fock cutoff is too small for the requested state."""

    def __init__(self, message, required_cutoff=None):
        super().__init__(message)
        self.required_cutoff = required_cutoff


class DomainError(ValidationError):
    """An argument lies outside the domain of the operation."""


class WrongPathError(DomainError):
    """The Fock fast path was requested for a scenario it cannot serve."""


class SizeGuardError(PhotoptixError):
    """A computation would exceed a configured size guard."""

    exit_code = EXIT_SIZE


class NumericalError(PhotoptixError, ArithmeticError):
    """Roundoff or conditioning pushed a result outside its tolerance."""

    exit_code = EXIT_NUMERIC


class SingularityError(NumericalError):
    """A matrix that must be inverted is singular."""
