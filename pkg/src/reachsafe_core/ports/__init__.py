"""
Ports (interfaces) for reachsafe.

These define the contracts that adapters must implement, so services can
be driven by alternative dynamics models or storage back ends in tests.
"""

from .dynamics_port import DynamicsPort
from .store_port import StorePort

__all__ = ["DynamicsPort", "StorePort"]
