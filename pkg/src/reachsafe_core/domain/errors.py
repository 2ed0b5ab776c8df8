"""
Errors raised by the reachsafe core.

Each error subclasses the built-in exception a caller would already expect
(`ValueError` for bad inputs, `RuntimeError` for runs that cannot finish),
so existing `except ValueError` handlers keep working.
"""

from typing import Optional


class DimensionMismatch(ValueError):
    """Operands of a box or network operation have incompatible dimensions."""


class RotationSpanTooLarge(ValueError):
    """A configuration box spans π or more in θ where a narrower one is required."""


class BelowThreshold(ValueError):
    """A cell cannot be split because no configuration width exceeds its threshold."""


class BadArch(ValueError):
    """A network architecture does not chain or has non-positive layer sizes."""


class EmptyDataset(ValueError):
    """A training or shaping step received no data points."""


class DegenerateStep(ValueError):
    """Two consecutive trajectory samples coincide, so no control can be extracted."""


class WorkspaceValidationError(ValueError):
    """A workspace or robot description failed validation.

    Attributes:
        field: Dotted path of the offending field, e.g. ``holes[1]``.
    """

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class Unreachable(RuntimeError):
    """The planner exhausted its iteration budget without reaching the goal."""


class EmptyPartition(RuntimeError):
    """The partition has no leaves, so nothing downstream can run."""
