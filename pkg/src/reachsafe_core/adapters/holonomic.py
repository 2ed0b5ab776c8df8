"""
Holonomic kinematic model.

z_{k+1} = z_k + K·u_k, with the interval extension A ⊕ K·B. The state and
control dimensions coincide; K defaults to 0.01.
"""

from typing import Tuple

import numpy as np

from ..domain.errors import DimensionMismatch
from ..ports.dynamics_port import DynamicsPort


class HolonomicDynamics(DynamicsPort):
    """Single-integrator dynamics with gain K."""

    def __init__(self, K: float = 0.01, dim: int = 3):
        if K <= 0:
            raise ValueError(f"Gain K must be positive, got {K}")
        self.K = float(K)
        self.dim = int(dim)

    @property
    def state_dim(self) -> int:
        return self.dim

    @property
    def control_dim(self) -> int:
        return self.dim

    def _check(self, a: np.ndarray, name: str) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.shape[-1] != self.dim:
            raise DimensionMismatch(f"{name} must have {self.dim} entries, got shape {a.shape}")
        return a

    def step(self, z: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self._check(z, "state") + self.K * self._check(u, "control")

    def step_box(self, lo: np.ndarray, hi: np.ndarray,
                 u_lo: np.ndarray, u_hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = self._check(lo, "state lo"), self._check(hi, "state hi")
        u_lo, u_hi = self._check(u_lo, "control lo"), self._check(u_hi, "control hi")
        return lo + self.K * u_lo, hi + self.K * u_hi

    def step_box_vjp(self, g_lo: np.ndarray, g_hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.K * np.asarray(g_lo, dtype=float), self.K * np.asarray(g_hi, dtype=float)

    def to_dict(self) -> dict:
        return {"type": "holonomic", "K": self.K}
