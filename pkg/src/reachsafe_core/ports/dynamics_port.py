"""
Dynamics port interface.

A dynamics model supplies the exact one-step map f(z, u) and a sound
interval extension f_oa(A, B) ⊇ {f(z, u) : z ∈ A, u ∈ B}. Box methods work
on stacked (N, n) endpoint arrays so a whole partition is handled at once.
"""

from abc import ABC, abstractmethod
from typing import Tuple

import numpy as np


class DynamicsPort(ABC):
    """Abstract discrete-time dynamics z_{k+1} = f(z_k, u_k)."""

    @property
    @abstractmethod
    def state_dim(self) -> int:
        pass

    @property
    @abstractmethod
    def control_dim(self) -> int:
        pass

    @abstractmethod
    def step(self, z: np.ndarray, u: np.ndarray) -> np.ndarray:
        """
        Exact successor state.

        Args:
            z: State (n,) or batch (N, n)
            u: Control (m,) or batch (N, m)

        Returns:
            Successor state(s), same leading shape as z
        """
        pass

    @abstractmethod
    def step_box(self, lo: np.ndarray, hi: np.ndarray,
                 u_lo: np.ndarray, u_hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Interval extension over stacked state and control boxes.

        Returns:
            (next_lo, next_hi) arrays of shape (N, n)
        """
        pass

    @abstractmethod
    def step_box_vjp(self, g_lo: np.ndarray, g_hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Pull cotangents on successor bounds back to the control-box bounds."""
        pass

    def to_dict(self) -> dict:
        return {"type": type(self).__name__}
