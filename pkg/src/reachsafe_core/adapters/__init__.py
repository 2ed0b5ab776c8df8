"""
Adapters for reachsafe.

Implementations of the port interfaces.
"""

from .holonomic import HolonomicDynamics
from .json_store import JsonStore

__all__ = ["HolonomicDynamics", "JsonStore"]
