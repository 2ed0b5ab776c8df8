"""
Domain models (DTOs) for reachsafe.

Workspace and robot geometry are held as shapely polygons; everything else
is plain data. The partition tree is the only mutable structure and is
only mutated between parallel evaluation waves.
"""

import copy
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import shapely
from shapely.geometry import Polygon

from .enums import CellLabel
from .intervals import Box, StateBox, split, volume_scaled


@dataclass(frozen=True)
class Workspace:
    """Free region W = interior(outer) minus the hole obstacles."""
    outer: Polygon
    holes: Tuple[Polygon, ...] = ()
    free: Polygon = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        free = Polygon(self.outer.exterior.coords, [h.exterior.coords for h in self.holes])
        shapely.prepare(free)
        object.__setattr__(self, "free", free)

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        """Axis-aligned bounding box (xmin, ymin, xmax, ymax) of W."""
        return self.outer.bounds

    def to_dict(self) -> Dict[str, Any]:
        return {
            "outer": [list(p) for p in list(self.outer.exterior.coords)[:-1]],
            "holes": [[list(p) for p in list(h.exterior.coords)[:-1]] for h in self.holes],
        }


@dataclass(frozen=True)
class RobotBody:
    """Robot footprint in its body frame.

    Attributes:
        footprint: Counter-clockwise polygon in body coordinates
        convex_pieces: Convex polygons whose union is the footprint
        r: Largest distance from the body origin to a footprint vertex
        core_radius: Clearance of the body origin inside the footprint
            (0 when the origin is outside or on the boundary)
    """
    footprint: Polygon
    convex_pieces: Tuple[Polygon, ...]
    r: float
    core_radius: float = 0.0

    def to_coords(self) -> List[List[float]]:
        return [list(p) for p in list(self.footprint.exterior.coords)[:-1]]


@dataclass
class Cell:
    """A node of the partition tree.

    `leaf` marks membership in the partition P; dropped cells keep their
    record (for diagnostics) with leaf=False and no children.
    """
    id: int
    box: StateBox
    label: CellLabel = CellLabel.MIXED
    parent: Optional[int] = None
    sibling: Optional[int] = None
    children: Optional[Tuple[int, int]] = None
    leaf: bool = False
    active: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "box": self.box.to_dict(),
            "label": self.label.value,
            "parent": self.parent,
            "sibling": self.sibling,
            "children": list(self.children) if self.children else None,
            "leaf": self.leaf,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Cell":
        children = data.get("children")
        return cls(
            id=int(data["id"]),
            box=StateBox.from_dict(data["box"]),
            label=CellLabel(data["label"]),
            parent=data.get("parent"),
            sibling=data.get("sibling"),
            children=tuple(children) if children else None,
            leaf=bool(data["leaf"]),
        )


@dataclass
class PartitionTree:
    """Binary cell tree whose leaves form the cover P of the safe set."""
    eps_w: Tuple[float, float, float]
    q_box: Box = Box.empty_dims()
    cells: Dict[int, Cell] = field(default_factory=dict)
    leaves: set = field(default_factory=set)
    frontier: List[int] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    _next_id: int = 0

    def new_cell(self, box: StateBox, parent: Optional[int] = None,
                 label: CellLabel = CellLabel.MIXED) -> Cell:
        cell = Cell(id=self._next_id, box=box, label=label, parent=parent)
        self.cells[cell.id] = cell
        self._next_id += 1
        return cell

    def subdivide(self, cell_id: int) -> Tuple[Cell, Cell]:
        """Bisect a cell, link the children, and remove the cell from P."""
        cell = self.cells[cell_id]
        left_box, right_box = split(cell.box, self.eps_w)
        left = self.new_cell(left_box, parent=cell_id, label=cell.label)
        right = self.new_cell(right_box, parent=cell_id, label=cell.label)
        left.sibling, right.sibling = right.id, left.id
        cell.children = (left.id, right.id)
        self.remove_leaf(cell_id)
        return left, right

    def add_leaf(self, cell_id: int) -> None:
        self.cells[cell_id].leaf = True
        self.leaves.add(cell_id)

    def remove_leaf(self, cell_id: int) -> None:
        self.cells[cell_id].leaf = False
        self.leaves.discard(cell_id)

    def discard(self, cell_id: int, label: Optional[CellLabel] = None) -> Cell:
        """Take a cell out of P but keep its record (leaf=False, no children)."""
        cell = self.cells[cell_id]
        self.remove_leaf(cell_id)
        if label is not None:
            cell.label = label
        return cell

    def merge(self, cell_id: int, label: Optional[CellLabel] = None) -> Cell:
        """Replace a cell and its sibling by their parent; returns the parent.

        The parent takes `label` when given, otherwise the cell's label.
        """
        cell = self.cells[cell_id]
        parent = self.cells[cell.parent]
        for child_id in parent.children:
            self.remove_leaf(child_id)
            del self.cells[child_id]
        parent.children = None
        parent.label = cell.label if label is None else label
        self.add_leaf(parent.id)
        return parent

    def leaf_ids(self) -> List[int]:
        """Leaf ids in ascending order (the canonical evaluation order)."""
        return sorted(self.leaves)

    def iter_leaves(self) -> Iterator[Cell]:
        for cell_id in self.leaf_ids():
            yield self.cells[cell_id]

    def safe_leaves(self) -> List[Cell]:
        return [c for c in self.iter_leaves() if c.label == CellLabel.SAFE]

    def leaf_volume(self, delta: Optional[Sequence[float]] = None) -> float:
        total = 0.0
        for cell in self.iter_leaves():
            box = cell.box.as_box()
            total += volume_scaled(box, delta if delta is not None else [1.0] * box.dim)
        return total

    def leaf_bounds(self, label: Optional[CellLabel] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Stacked (lo, hi) arrays of leaf boxes, optionally filtered by label."""
        cells = [c for c in self.iter_leaves() if label is None or c.label == label]
        if not cells:
            dim = 3 + self.q_box.dim
            return np.zeros((0, dim)), np.zeros((0, dim))
        return (np.array([c.box.lo for c in cells], dtype=float),
                np.array([c.box.hi for c in cells], dtype=float))

    def copy(self) -> "PartitionTree":
        return copy.deepcopy(self)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps": list(self.eps_w),
            "Q": self.q_box.to_dict(),
            "cells": [self.cells[i].to_dict() for i in sorted(self.cells)],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PartitionTree":
        tree = cls(eps_w=tuple(float(e) for e in data["eps"]), q_box=Box.from_dict(data["Q"]))
        for raw in data["cells"]:
            cell = Cell.from_dict(raw)
            tree.cells[cell.id] = cell
            if cell.leaf:
                tree.leaves.add(cell.id)
        tree._next_id = max(tree.cells, default=-1) + 1
        return tree


@dataclass(frozen=True)
class ReachBox:
    """One-step reachable box of a leaf and its safety violations."""
    source: int
    box: StateBox
    violation_p: float   # m², footprint over-approximation outside W
    violation_q: float   # volume of the misc part outside Q


@dataclass
class ViolationReport:
    """Per-epoch violation summary; one JSON line per epoch."""
    epoch: int
    violation_volume: float
    active_cells: int
    active_volume: float
    residual_unsafe_volume: float
    leaf_count: int
    J: float = 0.0
    J_S: float = 0.0
    lambda_S: float = 0.0
    wall_time_s: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epoch": self.epoch,
            "J": self.J,
            "J_S": self.J_S,
            "lambda_S": self.lambda_S,
            "violation_volume": self.violation_volume,
            "active_cells": self.active_cells,
            "active_volume": self.active_volume,
            "residual_unsafe_volume": self.residual_unsafe_volume,
            "leaf_count": self.leaf_count,
            "wall_time_s": self.wall_time_s,
        }


@dataclass
class Trajectory:
    """Planned path through configuration space."""
    waypoints: np.ndarray          # (N, 3) rows of (x, y, θ)
    collision_free: bool = True
    cost: float = 0.0


@dataclass
class Dataset:
    """Demonstration pairs (z, u) plus provenance."""
    states: np.ndarray             # (N, n)
    controls: np.ndarray           # (N, m)
    goal: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.states.shape[0])


@dataclass
class RolloutResult:
    """Closed-loop simulation outcome."""
    states: np.ndarray
    collision_step: Optional[int] = None
    reached: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "start": self.states[0].tolist(),
            "end": self.states[-1].tolist(),
            "steps": int(self.states.shape[0] - 1),
            "collision_step": self.collision_step,
            "reached": self.reached,
        }
