"""Exception hierarchy.

Everything raised deliberately by this package derives from ``MigrationGateError``.
The CLI maps the two branches below onto exit codes: ``InputError`` subclasses
exit with 1, ``IOFailure`` subclasses exit with 2.
"""

from __future__ import annotations


class MigrationGateError(Exception):
    """Base class for all package errors."""


class InputError(MigrationGateError):
    """Bad data, bad configuration, or an infeasible decision."""


class IOFailure(MigrationGateError):
    """Problems reading artifacts or talking to remote services."""


class DomainError(InputError, ValueError):
    """A numeric argument lies outside the domain of the function."""


class RecordParseError(InputError):
    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class ValidationError(InputError):
    pass


class EmptyCalibrationError(InputError):
    pass


class AlignmentError(InputError):
    pass


class EmptyDataError(InputError):
    pass


class InsufficientDataError(InputError):
    pass


class ConfigurationError(InputError):
    pass


class EmptyCandidatePoolError(InputError):
    pass


class InfeasibleSelectionError(InputError):
    def __init__(self, uncovered):
        self.uncovered = sorted(uncovered, key=lambda c: (c[0] or "", c[1]))
        listed = ", ".join(f"({r or '*'}, {m})" for r, m in self.uncovered)
        super().__init__(f"no surviving model covers: {listed}")


class RenderError(InputError):
    pass


class ParseFailure(InputError):
    """A judge reply did not contain a usable assessment."""


class JudgeAbortError(InputError):
    def __init__(self, message: str, outcomes=()):
        super().__init__(message)
        self.outcomes = list(outcomes)


class ReportError(InputError):
    pass


class CalibrationLoadError(IOFailure):
    pass


class TransportError(IOFailure):
    def __init__(self, message: str, attempts=()):
        super().__init__(message)
        self.attempts = list(attempts)
