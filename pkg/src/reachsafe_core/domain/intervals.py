"""
Composite-interval (box) arithmetic.

Boxes are immutable value objects. Configuration boxes carry the planar
position intervals and the heading interval; state boxes append the
miscellaneous ("q") intervals, which may be zero-dimensional.

All functions here are pure and safe to call from many threads.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import BelowThreshold, DimensionMismatch

TWO_PI = 2.0 * math.pi

# Relative slack on width/ε comparisons. Coordinates produced by repeated
# bisection carry rounding error, so a cell that is exactly ε wide in exact
# arithmetic may measure a few ulps wider.
WIDTH_TOL = 1e-9


@dataclass(frozen=True)
class SimpleInterval:
    """A closed interval [lo, hi] of the real line."""
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"Inverted interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class Box:
    """Cartesian product of simple intervals, stored as endpoint tuples."""
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise DimensionMismatch(f"lo has {len(self.lo)} entries, hi has {len(self.hi)}")
        for i, (a, b) in enumerate(zip(self.lo, self.hi)):
            if not a <= b:
                raise ValueError(f"Inverted interval in dimension {i}: [{a}, {b}]")

    @classmethod
    def from_arrays(cls, lo: Sequence[float], hi: Sequence[float]) -> "Box":
        return cls(tuple(float(v) for v in lo), tuple(float(v) for v in hi))

    @classmethod
    def point(cls, z: Sequence[float]) -> "Box":
        return cls.from_arrays(z, z)

    @classmethod
    def empty_dims(cls) -> "Box":
        """The 0-dimensional box (volume 1 by the empty-product convention)."""
        return cls((), ())

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def dims(self) -> List[SimpleInterval]:
        return [SimpleInterval(a, b) for a, b in zip(self.lo, self.hi)]

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.hi, dtype=float) - np.asarray(self.lo, dtype=float)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo, dtype=float) + np.asarray(self.hi, dtype=float))

    def contains_point(self, z: Sequence[float], tol: float = 0.0) -> bool:
        z = np.asarray(z, dtype=float)
        return bool(np.all(z >= np.asarray(self.lo) - tol) and np.all(z <= np.asarray(self.hi) + tol))

    def contains_box(self, other: "Box", tol: float = 0.0) -> bool:
        _check_dims(self, other)
        return bool(
            np.all(np.asarray(other.lo) >= np.asarray(self.lo) - tol)
            and np.all(np.asarray(other.hi) <= np.asarray(self.hi) + tol)
        )

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_dict(cls, data: dict) -> "Box":
        return cls.from_arrays(data["lo"], data["hi"])


@dataclass(frozen=True)
class ConfigBox:
    """Configuration cell X_p = [x] × [y] × [θ] (meters, meters, radians)."""
    x: SimpleInterval
    y: SimpleInterval
    theta: SimpleInterval

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float]) -> "ConfigBox":
        return cls(
            SimpleInterval(float(lo[0]), float(hi[0])),
            SimpleInterval(float(lo[1]), float(hi[1])),
            SimpleInterval(float(lo[2]), float(hi[2])),
        )

    @property
    def lo(self) -> Tuple[float, float, float]:
        return (self.x.lo, self.y.lo, self.theta.lo)

    @property
    def hi(self) -> Tuple[float, float, float]:
        return (self.x.hi, self.y.hi, self.theta.hi)

    @property
    def widths(self) -> np.ndarray:
        return np.array([self.x.width, self.y.width, self.theta.width])

    def as_box(self) -> Box:
        return Box(self.lo, self.hi)

    def with_theta(self, lo: float, hi: float) -> "ConfigBox":
        return ConfigBox(self.x, self.y, SimpleInterval(lo, hi))


@dataclass(frozen=True)
class StateBox:
    """State cell X = X_p × X_q."""
    cfg: ConfigBox
    misc: Box = Box.empty_dims()

    @property
    def dim(self) -> int:
        return 3 + self.misc.dim

    @property
    def lo(self) -> Tuple[float, ...]:
        return self.cfg.lo + self.misc.lo

    @property
    def hi(self) -> Tuple[float, ...]:
        return self.cfg.hi + self.misc.hi

    def as_box(self) -> Box:
        return Box(self.lo, self.hi)

    @classmethod
    def from_box(cls, box: Box) -> "StateBox":
        if box.dim < 3:
            raise DimensionMismatch(f"State boxes need at least 3 dimensions, got {box.dim}")
        return cls(ConfigBox.from_bounds(box.lo[:3], box.hi[:3]), Box(box.lo[3:], box.hi[3:]))

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_dict(cls, data: dict) -> "StateBox":
        return cls.from_box(Box.from_dict(data))


def _check_dims(a: Box, b: Box) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"Box dimensions differ: {a.dim} vs {b.dim}")


def volume_scaled(b: Box, delta: Sequence[float]) -> float:
    """Π_i δ_i·(hi_i − lo_i); the 0-dimensional box has volume 1."""
    if len(delta) != b.dim:
        raise DimensionMismatch(f"{len(delta)} scaling factors for a {b.dim}-dimensional box")
    return float(np.prod(np.asarray(delta, dtype=float) * b.widths))


def intersect(a: Box, b: Box) -> Optional[Box]:
    """Componentwise intersection, or None when any component inverts."""
    _check_dims(a, b)
    lo = np.maximum(a.lo, b.lo)
    hi = np.minimum(a.hi, b.hi)
    if np.any(lo > hi):
        return None
    return Box.from_arrays(lo, hi)


def minkowski_sum(a: Box, b: Box) -> Box:
    _check_dims(a, b)
    return Box.from_arrays(np.add(a.lo, b.lo), np.add(a.hi, b.hi))


def theta_fragments(lo: float, hi: float) -> List[Tuple[float, float, bool, bool]]:
    """Split a heading interval onto [0, 2π].

    Returns (frag_lo, frag_hi, lo_tracks_input_lo, hi_tracks_input_hi) tuples.
    The flags say whether a fragment endpoint moves with the corresponding
    input endpoint (it does unless it was pinned to 0 or 2π by the wrap);
    gradient code uses them to route cotangents back.
    """
    if hi - lo >= TWO_PI:
        return [(0.0, TWO_PI, False, False)]
    k = math.floor(lo / TWO_PI)
    a = lo - k * TWO_PI
    b = hi - k * TWO_PI
    if b <= TWO_PI:
        return [(a, b, True, True)]
    return [(a, TWO_PI, True, False), (0.0, b - TWO_PI, False, True)]


def wrap_theta(cfg: ConfigBox) -> List[ConfigBox]:
    """Map the θ interval into [0, 2π), splitting at the seam if needed."""
    return [cfg.with_theta(a, b) for a, b, _, _ in theta_fragments(cfg.theta.lo, cfg.theta.hi)]


def normalized_width(cfg: ConfigBox, eps: Sequence[float]) -> float:
    """max_i width_i / ε_i over the configuration dimensions."""
    return float(np.max(cfg.widths / np.asarray(eps, dtype=float)))


def above_threshold(cfg: ConfigBox, eps: Sequence[float]) -> bool:
    """True when some configuration width exceeds its ε by more than rounding."""
    return normalized_width(cfg, eps) > 1.0 + WIDTH_TOL


def bisect(cfg: ConfigBox, eps: Sequence[float]) -> Tuple[ConfigBox, ConfigBox]:
    """Halve the dimension with the largest width_i/ε_i, ignoring the threshold.

    Ties go to the lowest dimension index.
    """
    axis = int(np.argmax(cfg.widths / np.asarray(eps, dtype=float)))
    lo = list(cfg.lo)
    hi = list(cfg.hi)
    mid = 0.5 * (lo[axis] + hi[axis])
    left_hi = list(hi)
    left_hi[axis] = mid
    right_lo = list(lo)
    right_lo[axis] = mid
    return ConfigBox.from_bounds(lo, left_hi), ConfigBox.from_bounds(right_lo, hi)


def split(b: StateBox, eps: Sequence[float]) -> Tuple[StateBox, StateBox]:
    """Bisect a cell that is still wider than ε. The misc part is copied unchanged.

    Raises:
        BelowThreshold: If no width exceeds its ε (beyond rounding)
    """
    ratio = normalized_width(b.cfg, eps)
    if ratio <= 1.0 + WIDTH_TOL:
        raise BelowThreshold(f"No configuration width exceeds its threshold (max ratio {ratio:.3g})")
    left, right = bisect(b.cfg, eps)
    return StateBox(left, b.misc), StateBox(right, b.misc)
