"""
Domain models for reachsafe.

Contains boxes, dataclasses, enums and errors used throughout the library.
"""

from .intervals import (
    SimpleInterval,
    Box,
    ConfigBox,
    StateBox,
    volume_scaled,
    intersect,
    minkowski_sum,
    wrap_theta,
    split,
)
from .models import (
    Workspace,
    RobotBody,
    Cell,
    PartitionTree,
    ReachBox,
    ViolationReport,
    Trajectory,
    Dataset,
    RolloutResult,
)
from .enums import CellLabel, Activation, ShapingMode

__all__ = [
    # Boxes
    "SimpleInterval",
    "Box",
    "ConfigBox",
    "StateBox",
    "volume_scaled",
    "intersect",
    "minkowski_sum",
    "wrap_theta",
    "split",
    # Models
    "Workspace",
    "RobotBody",
    "Cell",
    "PartitionTree",
    "ReachBox",
    "ViolationReport",
    "Trajectory",
    "Dataset",
    "RolloutResult",
    # Enums
    "CellLabel",
    "Activation",
    "ShapingMode",
]
