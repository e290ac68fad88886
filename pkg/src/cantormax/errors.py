"""Exception types shared across the package.

The CLI maps these onto its stable exit codes: config/usage problems exit 2,
gate or check failures exit 1, capacity refusals exit 3.
"""


class CantorError(Exception):
    """Base class for all package errors."""


class ParameterError(CantorError, ValueError):
    """Invalid construction parameters or schedules."""


class InvalidIndexError(CantorError, ValueError):
    """Multi-index entry out of bounds for the level schedule."""


class StructureError(CantorError, ValueError):
    """Nesting or tiling violation in a selection family."""


class DegenerateMeasureError(CantorError, ValueError):
    """An operation required P_k > 0 but the level is empty."""


class InsufficientDepthError(CantorError, ValueError):
    """The requested statistic needs more construction levels."""


class GridError(CantorError, ValueError):
    """A set or assignment is not aligned with the discretization grid."""


class CapacityError(CantorError, RuntimeError):
    """An enumeration would exceed its configured output cap."""


class EmptySampleError(CantorError, ValueError):
    """A sampled statistic received budget 0 or found no admissible samples."""


class DomainError(CantorError, ValueError):
    """Arguments violate a documented precondition."""


class ConfigError(CantorError, ValueError):
    """Config file could not be parsed or validated."""

    def __init__(self, message, line=None, field=None):
        detail = message
        if line is not None:
            detail = f"line {line}: {detail}"
        if field is not None:
            detail = f"{detail} (field {field!r})"
        super().__init__(detail)
        self.line = line
        self.field = field


class FormatError(CantorError, ValueError):
    """A stored artifact (set file, report) is corrupt or unreadable."""


class ConstructionFailure(CantorError, RuntimeError):
    """Retries exhausted before all gates passed; carries the transcript."""

    def __init__(self, message, transcript):
        super().__init__(message)
        self.transcript = list(transcript)
