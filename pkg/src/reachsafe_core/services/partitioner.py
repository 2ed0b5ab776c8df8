"""
Partition Service - adaptive cover of the safe configuration set.

Seeds a frontier with the workspace bounding box × [0, 2π) × Q, cut into
θ sectors so every cell spans less than π, then repeatedly pops a cell and
classifies it:
1. Safe   - the footprint over-approximation lies in W; kept as a leaf
2. Unsafe - the under-approximation (or the core disk) leaves W; discarded
3. Mixed  - bisected while wider than ε_w, otherwise kept as a Mixed leaf

A Mixed cell at minimum width gets one more chance to be discarded: it is
bisected a few levels below ε_w and dropped when every piece is Unsafe.
The pieces are never added to the tree.

Cells are popped in waves from the top of a LIFO stack. Each wave is
classified in parallel and committed in pop order, so the resulting tree
(ids included) does not depend on the thread count.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..domain.enums import CellLabel
from ..domain.intervals import (
    TWO_PI,
    WIDTH_TOL,
    Box,
    ConfigBox,
    StateBox,
    above_threshold,
    bisect,
    volume_scaled,
)
from ..domain.models import PartitionTree, RobotBody, Workspace
from .geometry import (
    amplification_radius,
    contains,
    core_disk_unsafe,
    eroded_free_region,
    footprint_over_approx,
    footprint_under_approx,
    is_safe_configuration,
)
from .parallel import ordered_map

logger = logging.getLogger(__name__)

WAVE_SIZE = 64


def default_theta_sectors(eps_theta: float) -> int:
    """Sector count whose repeated bisection lands on 2π/m, m = ⌈2π/ε_θ⌉.

    The count is the odd part of m, doubled until it is at least 3.
    """
    m = max(1, math.ceil(TWO_PI / float(eps_theta) - WIDTH_TOL))
    n = m
    while n % 2 == 0 and n // 2 >= 3:
        n //= 2
    while n < 3:
        n *= 2
    return n


@dataclass
class PartitionConfig:
    """Settings for building a partition.

    theta_sectors=None picks `default_theta_sectors(ε_θ)`.
    """
    eps_w: Tuple[float, float, float] = (0.25, 0.25, 0.2 * math.pi)
    theta_sectors: Optional[int] = None
    unsafe_search_depth: int = 3
    threads: int = 1

    def __post_init__(self):
        self.eps_w = tuple(float(e) for e in self.eps_w)
        if len(self.eps_w) != 3 or any(e <= 0 for e in self.eps_w):
            raise ValueError(f"eps_w must be three positive thresholds, got {self.eps_w}")
        if self.theta_sectors is not None and self.theta_sectors < 3:
            raise ValueError("theta_sectors must be at least 3 so every sector spans less than π")
        if self.unsafe_search_depth < 0:
            raise ValueError("unsafe_search_depth must be non-negative")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps_w": list(self.eps_w),
            "theta_sectors": self.theta_sectors,
            "unsafe_search_depth": self.unsafe_search_depth,
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PartitionConfig":
        defaults = cls()
        sectors = data.get("theta_sectors", defaults.theta_sectors)
        return cls(
            eps_w=tuple(data.get("eps_w", defaults.eps_w)),
            theta_sectors=None if sectors is None else int(sectors),
            unsafe_search_depth=int(data.get("unsafe_search_depth", defaults.unsafe_search_depth)),
            threads=int(data.get("threads", defaults.threads)),
        )


def finest_widths(widths: Sequence[float], eps: Sequence[float]) -> np.ndarray:
    """Widths reached by bisecting each dimension until it is at most ε."""
    out = []
    for w, e in zip(widths, eps):
        w = float(w)
        while w / e > 1.0 + WIDTH_TOL:
            w *= 0.5
        out.append(w)
    return np.array(out)


class PartitionBuilder:
    """
    Builds the cell cover P of the safe set.

    The workspace, robot, and derived eroded region are fixed per builder;
    classification itself is pure and runs on worker threads.
    """

    def __init__(self, workspace: Workspace, robot: RobotBody, threads: int = 1,
                 unsafe_search_depth: int = 3):
        """
        Initialize the builder.

        Args:
            workspace: Validated workspace
            robot: Robot footprint
            threads: Worker threads for classification waves
            unsafe_search_depth: Bisection levels below ε_w tried when
                proving a minimum-width Mixed cell Unsafe (0 disables)
        """
        self.workspace = workspace
        self.robot = robot
        self.threads = max(1, int(threads))
        self.unsafe_search_depth = max(0, int(unsafe_search_depth))
        self._core_region = (
            eroded_free_region(workspace, robot.core_radius) if robot.core_radius > 0 else None
        )

    def classify_cell(self, cfg_box: ConfigBox) -> CellLabel:
        """Safe iff A_o ⊆ W; Unsafe iff A_u ⊄ W or the core disk cannot fit; else Mixed."""
        if contains(self.workspace, footprint_over_approx(self.robot, cfg_box)):
            return CellLabel.SAFE
        if not contains(self.workspace, footprint_under_approx(self.robot, cfg_box)):
            return CellLabel.UNSAFE
        if core_disk_unsafe(cfg_box, self._core_region):
            return CellLabel.UNSAFE
        return CellLabel.MIXED

    def collides_everywhere(self, cfg_box: ConfigBox, eps_w: Sequence[float], depth: int) -> bool:
        """
        Show that no configuration of a Mixed cell is safe by bisecting it.

        Each half must classify Unsafe, or be shown so recursively, within
        `depth` further levels. A safe center configuration or a Safe half
        ends the search early.

        Returns:
            True only when every configuration of cfg_box collides
        """
        if depth <= 0:
            return False
        if is_safe_configuration(self.workspace, self.robot, cfg_box.as_box().center):
            return False
        for half in bisect(cfg_box, eps_w):
            label = self.classify_cell(half)
            if label == CellLabel.SAFE:
                return False
            if label == CellLabel.MIXED and not self.collides_everywhere(half, eps_w, depth - 1):
                return False
        return True

    def _frontier_label(self, cfg_box: ConfigBox, eps_w: Sequence[float]) -> Tuple[CellLabel, bool]:
        """Label of a frontier cell, and whether the bisection search decided it."""
        label = self.classify_cell(cfg_box)
        if (label == CellLabel.MIXED and not above_threshold(cfg_box, eps_w)
                and self.collides_everywhere(cfg_box, eps_w, self.unsafe_search_depth)):
            return CellLabel.UNSAFE, True
        return label, False

    def seed_boxes(self, q_box: Box, theta_sectors: int) -> List[StateBox]:
        """Bounding box of W × [0, 2π) × Q, cut into equal θ sectors."""
        xmin, ymin, xmax, ymax = self.workspace.bounds
        edges = np.linspace(0.0, TWO_PI, theta_sectors + 1)
        return [
            StateBox(ConfigBox.from_bounds((xmin, ymin, a), (xmax, ymax, b)), q_box)
            for a, b in zip(edges[:-1], edges[1:])
        ]

    def build_partition(self, q_box: Box, eps_w: Sequence[float],
                        theta_sectors: Optional[int] = None) -> PartitionTree:
        """
        Run the frontier loop until it is empty.

        Args:
            q_box: Safe interval of the miscellaneous state (may be 0-dimensional)
            eps_w: Subdivision thresholds (ε_x, ε_y, ε_θ)
            theta_sectors: Number of initial θ sectors (≥ 3); None picks
                the count whose bisection lands on ε_θ

        Returns:
            PartitionTree whose leaves are the Safe and Mixed cells
        """
        eps_w = tuple(float(e) for e in eps_w)
        if theta_sectors is None:
            theta_sectors = default_theta_sectors(eps_w[2])
        tree = PartitionTree(eps_w=eps_w, q_box=q_box)
        seeds = self.seed_boxes(q_box, theta_sectors)
        for box in seeds:
            tree.frontier.append(tree.new_cell(box).id)
        # Stack top is the end of the list; reverse so sector 0 pops first.
        tree.frontier.reverse()

        bounds = self._loop_bounds(seeds, eps_w)
        counter = 0
        proven_unsafe = 0
        discarded_volume = 0.0

        while tree.frontier:
            wave = [tree.frontier.pop() for _ in range(min(WAVE_SIZE, len(tree.frontier)))]
            results = ordered_map(lambda cid: self._frontier_label(tree.cells[cid].box.cfg, eps_w),
                                 wave, self.threads)
            for cell_id, (label, proven) in zip(wave, results):
                counter += 1
                cell = tree.cells[cell_id]
                cell.label = label
                wide = above_threshold(cell.box.cfg, eps_w)
                if label == CellLabel.SAFE:
                    tree.add_leaf(cell_id)
                elif label == CellLabel.UNSAFE:
                    tree.discard(cell_id)
                    discarded_volume += volume_scaled(cell.box.cfg.as_box(), (1.0, 1.0, 1.0))
                    proven_unsafe += int(proven)
                elif wide:
                    left, right = tree.subdivide(cell_id)
                    tree.frontier.extend([right.id, left.id])
                else:
                    tree.add_leaf(cell_id)
            logger.debug("wave of %d cells, %d leaves, %d pending", len(wave), len(tree.leaves), len(tree.frontier))

        if counter > bounds["loop_bound"]:
            raise AssertionError(f"Partition loop ran {counter} times, above its bound {bounds['loop_bound']:.0f}")

        safe = sum(1 for c in tree.iter_leaves() if c.label == CellLabel.SAFE)
        tree.diagnostics = {
            "loop_counter": counter,
            **bounds,
            "theta_sectors": theta_sectors,
            "discarded_unsafe_volume": discarded_volume,
            "proven_unsafe_cells": proven_unsafe,
            "safe_leaves": safe,
            "mixed_leaves": len(tree.leaves) - safe,
            "amplification_radius": amplification_radius(self.robot, eps_w),
        }
        logger.info("Partition built: %d leaves (%d safe) after %d iterations", len(tree.leaves), safe, counter)
        return tree

    @staticmethod
    def _loop_bounds(seeds: List[StateBox], eps_w: Tuple[float, float, float]) -> Dict[str, float]:
        """Iteration bounds of the frontier loop.

        `loop_bound` uses the volume of the finest cell bisection can reach,
        which is what the counting argument needs; `loop_bound_nominal`
        replaces it with ε_x·ε_y·ε_θ.
        """
        volume = sum(float(np.prod(s.cfg.widths)) for s in seeds)
        smallest = min(float(np.prod(finest_widths(s.cfg.widths, eps_w))) for s in seeds)
        return {
            "loop_bound": 2.0 * volume / smallest,
            "loop_bound_nominal": 2.0 * volume / float(np.prod(eps_w)),
        }
