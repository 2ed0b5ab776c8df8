"""
Services for reachsafe.

Geometry, network evaluation, partitioning, reachability, training,
planning and figure export.
"""

from .partitioner import PartitionBuilder, PartitionConfig
from .reachability import ReachabilityService, RefineConfig, RefineResult
from .planner import RrtStarPlanner, PlannerConfig
from .trainer import (
    Adam,
    LossConfig,
    OptimizerConfig,
    PipelineConfig,
    PipelineResult,
    ScheduleConfig,
    TrainState,
    run_pipeline,
    train_base,
)

__all__ = [
    "PartitionBuilder",
    "PartitionConfig",
    "ReachabilityService",
    "RefineConfig",
    "RefineResult",
    "RrtStarPlanner",
    "PlannerConfig",
    "Adam",
    "LossConfig",
    "OptimizerConfig",
    "PipelineConfig",
    "PipelineResult",
    "ScheduleConfig",
    "TrainState",
    "run_pipeline",
    "train_base",
]
