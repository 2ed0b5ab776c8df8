"""
Reachability Service - one-step reach sets, refinement, and reporting.

Provides:
1. Reach boxes F̄(X) = f_oa(X, φ̄(X)) for every leaf, batched through IBP
2. The penalty test against footprint and miscellaneous-state tolerances
3. Partition refinement: subdivide violating cells, drop violating cells at
   minimum width, and merge passing siblings back together
4. Violation reports (outside volume, active cells, residual unsafe volume)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..domain.enums import CellLabel
from ..domain.intervals import TWO_PI, Box, StateBox, above_threshold, intersect, volume_scaled
from ..domain.models import Cell, PartitionTree, ReachBox, RobotBody, ViolationReport, Workspace
from ..ports.dynamics_port import DynamicsPort
from .coverage import coverage
from .geometry import swept_over_approx, violation_area
from .network import Mlp, ibp_batch
from .parallel import ordered_map
from .partitioner import PartitionBuilder

logger = logging.getLogger(__name__)

DEFAULT_DELTA = (1.0, 1.0, 1.0 / TWO_PI)


@dataclass
class RefineConfig:
    """Tolerances for the refinement penalty test."""
    eps_p: float = 1e-2
    eps_q: float = 1e-2

    def to_dict(self) -> Dict[str, Any]:
        return {"eps_p": self.eps_p, "eps_q": self.eps_q}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RefineConfig":
        return cls(eps_p=float(data.get("eps_p", 1e-2)), eps_q=float(data.get("eps_q", 1e-2)))


@dataclass
class RefineResult:
    """Outcome of one refinement pass."""
    tree: PartitionTree
    loop_counter: int
    loop_bound: float
    residual_unsafe_volume: float
    dropped: List[Dict[str, Any]] = field(default_factory=list)
    subdivisions: int = 0
    merges: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "loop_counter": self.loop_counter,
            "loop_bound": self.loop_bound,
            "residual_unsafe_volume": self.residual_unsafe_volume,
            "subdivisions": self.subdivisions,
            "merges": self.merges,
            "leaf_count": len(self.tree.leaves),
            "dropped": self.dropped,
        }


def default_delta(state_dim: int) -> Tuple[float, ...]:
    """(1, 1, 1/2π) for the configuration followed by 1 for each misc dimension."""
    return DEFAULT_DELTA + (1.0,) * (state_dim - 3)


def refine_loop_bound(tree: PartitionTree) -> float:
    """Σ_leaves [2 + 4·(Π_i max(1, 2·w_i/ε_i) − 1)]."""
    eps = np.asarray(tree.eps_w, dtype=float)
    total = 0.0
    for cell in tree.iter_leaves():
        pieces = float(np.prod(np.maximum(1.0, 2.0 * cell.box.cfg.widths / eps)))
        total += 2.0 + 4.0 * (pieces - 1.0)
    return total


class ReachabilityService:
    """
    Evaluates closed-loop reach sets of partition cells.

    Geometry calls run on worker threads; the numeric parts are batched.
    """

    def __init__(self, workspace: Workspace, robot: RobotBody, dynamics: DynamicsPort, threads: int = 1):
        """
        Initialize the service.

        Args:
            workspace: Validated workspace
            robot: Robot footprint
            dynamics: One-step model with an interval extension
            threads: Worker threads for per-cell geometry
        """
        self.workspace = workspace
        self.robot = robot
        self.dynamics = dynamics
        self.threads = max(1, int(threads))
        self._classifier = PartitionBuilder(workspace, robot)

    # === Reach boxes ===

    def reach_bounds(self, net: Mlp, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray, list]:
        """Stacked reach-box endpoints and the IBP cache for gradients."""
        u_lo, u_hi, cache = ibp_batch(net, lo, hi)
        r_lo, r_hi = self.dynamics.step_box(lo, hi, u_lo, u_hi)
        return r_lo, r_hi, cache

    def _violations(self, box: StateBox, q_box: Box) -> Tuple[float, float]:
        violation_p = violation_area(swept_over_approx(self.robot, box.cfg), self.workspace)
        if box.misc.dim == 0:
            return violation_p, 0.0
        ones = (1.0,) * box.misc.dim
        inside = intersect(box.misc, q_box)
        violation_q = volume_scaled(box.misc, ones) - (volume_scaled(inside, ones) if inside else 0.0)
        return violation_p, max(violation_q, 0.0)

    def reach_cells(self, net: Mlp, cells: Sequence[Cell], q_box: Box) -> List[ReachBox]:
        """Reach boxes for many cells, in the given order."""
        if not cells:
            return []
        lo = np.array([c.box.lo for c in cells], dtype=float)
        hi = np.array([c.box.hi for c in cells], dtype=float)
        r_lo, r_hi, _ = self.reach_bounds(net, lo, hi)
        boxes = [StateBox.from_box(Box.from_arrays(a, b)) for a, b in zip(r_lo, r_hi)]
        violations = ordered_map(lambda b: self._violations(b, q_box), boxes, self.threads)
        return [
            ReachBox(source=c.id, box=b, violation_p=vp, violation_q=vq)
            for c, b, (vp, vq) in zip(cells, boxes, violations)
        ]

    def cell_reach(self, net: Mlp, cell: Cell, q_box: Optional[Box] = None) -> ReachBox:
        """F̄(X) for one cell with its footprint and misc-state violations."""
        q_box = q_box if q_box is not None else cell.box.misc
        return self.reach_cells(net, [cell], q_box)[0]

    @staticmethod
    def penalty_test(rb: ReachBox, eps_p: float, eps_q: float) -> bool:
        """True when the reach box violates a tolerance."""
        return rb.violation_p > eps_p or rb.violation_q > eps_q

    # === Refinement ===

    def refine_partition(self, tree: PartitionTree, net: Mlp, eps_p: float = 1e-2, eps_q: float = 1e-2,
                         eps_w: Optional[Sequence[float]] = None) -> RefineResult:
        """
        Refine a partition against the current network.

        Works on a copy; the input tree is left untouched.

        Args:
            tree: Partition from build_partition or an earlier refinement
            net: Current controller
            eps_p: Footprint violation tolerance (m²)
            eps_q: Misc-state violation tolerance
            eps_w: Subdivision thresholds (defaults to the tree's)

        Returns:
            RefineResult with the refined tree and loop accounting
        """
        out = tree.copy()
        if eps_w is not None:
            out.eps_w = tuple(float(e) for e in eps_w)
        q_box = out.q_box
        bound = refine_loop_bound(out)

        reach: Dict[int, ReachBox] = {
            rb.source: rb for rb in self.reach_cells(net, list(out.iter_leaves()), q_box)
        }

        def fails(cell_id: int) -> bool:
            if cell_id not in reach:
                reach[cell_id] = self.cell_reach(net, out.cells[cell_id], q_box)
            return self.penalty_test(reach[cell_id], eps_p, eps_q)

        work = sorted(out.leaves, reverse=True)
        pending = set(work)
        counter = 0
        residual = 0.0
        dropped: List[Dict[str, Any]] = []
        subdivisions = merges = 0
        delta = default_delta(out.cells[work[-1]].box.dim) if work else DEFAULT_DELTA

        while work:
            cell_id = work.pop()
            if cell_id not in pending:
                continue
            pending.discard(cell_id)
            counter += 1
            cell = out.cells[cell_id]

            if fails(cell_id):
                if above_threshold(cell.box.cfg, out.eps_w):
                    left, right = out.subdivide(cell_id)
                    subdivisions += 1
                    work.extend([right.id, left.id])
                    pending.update([left.id, right.id])
                    for child in (left, right):
                        child.leaf = True
                        out.leaves.add(child.id)
                else:
                    rb = reach[cell_id]
                    out.discard(cell_id)
                    residual += volume_scaled(cell.box.as_box(), delta)
                    dropped.append({
                        "id": cell_id,
                        "box": cell.box.to_dict(),
                        "violation_p": rb.violation_p,
                        "violation_q": rb.violation_q,
                    })
                    logger.warning("Dropped cell %d at minimum width (violation %.3g m²)", cell_id, rb.violation_p)
                continue

            if self._can_merge(out, cell, fails):
                sibling_id = cell.sibling
                pending.discard(sibling_id)
                parent = out.merge(cell_id, self._classifier.classify_cell(out.cells[cell.parent].box.cfg))
                merges += 1
                work.append(parent.id)
                pending.add(parent.id)
            # Otherwise the cell stays a leaf (committed).

        if counter > bound:
            raise AssertionError(f"Refinement loop ran {counter} times, above its bound {bound:.0f}")

        for cell_id in out.leaf_ids():
            if fails(cell_id):
                raise AssertionError(f"Refined leaf {cell_id} still violates the tolerances")

        logger.info("Refinement: %d leaves, %d subdivisions, %d merges, %d dropped",
                    len(out.leaves), subdivisions, merges, len(dropped))
        return RefineResult(
            tree=out,
            loop_counter=counter,
            loop_bound=bound,
            residual_unsafe_volume=residual,
            dropped=dropped,
            subdivisions=subdivisions,
            merges=merges,
        )

    @staticmethod
    def _can_merge(tree: PartitionTree, cell: Cell, fails) -> bool:
        """Sibling is a passing leaf with the same label, and the parent passes with θ-width < π."""
        if cell.parent is None or cell.sibling is None:
            return False
        sibling = tree.cells.get(cell.sibling)
        if sibling is None or not sibling.leaf or sibling.label != cell.label:
            return False
        parent = tree.cells[cell.parent]
        if parent.box.cfg.theta.width >= math.pi:
            return False
        return not fails(sibling.id) and not fails(parent.id)

    # === Reporting ===

    def violation_report(self, tree: PartitionTree, net: Mlp, delta: Optional[Sequence[float]] = None,
                         epoch: int = 0, eps_smooth: float = 1e-12,
                         residual_unsafe_volume: float = 0.0) -> ViolationReport:
        """
        Measure how much reach-box volume escapes the Safe leaves.

        Marks each leaf's `active` flag as a side effect.
        """
        cells = list(tree.iter_leaves())
        if not cells:
            return ViolationReport(epoch=epoch, violation_volume=0.0, active_cells=0, active_volume=0.0,
                                   residual_unsafe_volume=residual_unsafe_volume, leaf_count=0)
        lo = np.array([c.box.lo for c in cells], dtype=float)
        hi = np.array([c.box.hi for c in cells], dtype=float)
        delta = tuple(delta) if delta is not None else default_delta(lo.shape[1])
        r_lo, r_hi, _ = self.reach_bounds(net, lo, hi)
        safe_lo, safe_hi = tree.leaf_bounds(CellLabel.SAFE)
        cov = coverage(r_lo, r_hi, safe_lo, safe_hi, delta, eps_smooth)

        active = cov.active
        active_volume = 0.0
        for cell, flag in zip(cells, active):
            cell.active = bool(flag)
            if flag:
                active_volume += volume_scaled(cell.box.as_box(), delta)
        return ViolationReport(
            epoch=epoch,
            violation_volume=float(np.sum(cov.outside)),
            active_cells=int(np.count_nonzero(active)),
            active_volume=active_volume,
            residual_unsafe_volume=residual_unsafe_volume,
            leaf_count=len(cells),
        )

    def active_cell_ids(self, tree: PartitionTree, net: Mlp, delta: Optional[Sequence[float]] = None,
                        eps_smooth: float = 1e-12) -> List[int]:
        self.violation_report(tree, net, delta, eps_smooth=eps_smooth)
        return [c.id for c in tree.iter_leaves() if c.active]
