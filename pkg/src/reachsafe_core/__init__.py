"""
reachsafe core - headless library for safety-aware controller training.

Trains feed-forward controllers for a planar polygonal robot and bounds
their one-step safety violations over an adaptive partition of the safe
configuration set. It has no command-line or plotting dependencies and can
be embedded in other applications.
"""

__version__ = "0.1.0"


# Lazy imports to avoid loading shapely and friends until needed
def __getattr__(name):
    if name == "JsonStore":
        from .adapters.json_store import JsonStore
        return JsonStore
    elif name == "HolonomicDynamics":
        from .adapters.holonomic import HolonomicDynamics
        return HolonomicDynamics
    elif name == "PartitionBuilder":
        from .services.partitioner import PartitionBuilder
        return PartitionBuilder
    elif name == "ReachabilityService":
        from .services.reachability import ReachabilityService
        return ReachabilityService
    elif name == "RrtStarPlanner":
        from .services.planner import RrtStarPlanner
        return RrtStarPlanner
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "__version__",
    "JsonStore",
    "HolonomicDynamics",
    "PartitionBuilder",
    "ReachabilityService",
    "RrtStarPlanner",
]
