"""
Enumerations for the reachsafe domain.
"""

from enum import Enum


class CellLabel(str, Enum):
    """Classification of a configuration cell against the workspace."""
    SAFE = "safe"       # every footprint over the cell lies in W
    UNSAFE = "unsafe"   # no footprint over the cell lies in W
    MIXED = "mixed"     # undecided at the current resolution


class Activation(str, Enum):
    """Layer activations. Both are continuous and strictly increasing."""
    TANH = "tanh"
    IDENTITY = "identity"


class ShapingMode(str, Enum):
    """How demonstration controls are rescaled around the goal."""
    PAPER = "paper"             # 10·‖e‖/(1 − ‖e‖), clamped
    SATURATING = "saturating"   # 10·‖e‖/(1 + ‖e‖)
