"""
RRT* planner in (x, y, θ).

Edges are straight lines in the plane with θ interpolated along the shorter
arc; an edge is accepted when every footprint sampled at spacing Δs along
it lies in the workspace. Distances weight heading change by the robot
radius r, so a rotation costs as much as the arc its farthest vertex sweeps.
A found path is shortcut greedily before it is returned.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..domain.errors import Unreachable
from ..domain.intervals import TWO_PI
from ..domain.models import RobotBody, Trajectory, Workspace
from .geometry import is_safe_configuration

logger = logging.getLogger(__name__)


@dataclass
class PlannerConfig:
    """RRT* parameters."""
    max_iters: int = 4000
    step: float = 0.4
    rewire_radius: float = 0.8
    goal_bias: float = 0.1
    extra_iters: int = 300      # iterations spent improving after the first solution
    resolution: float = 0.0625  # Δs = 0.25·min(ε_x, ε_y)
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PlannerConfig":
        return cls(**{k: data[k] for k in cls().__dict__ if k in data})


@dataclass
class SearchTree:
    """Grown RRT* tree with its parent and cost tables.

    best_costs holds the cheapest known start-to-goal cost after each
    iteration (inf until the goal is first connected).
    """
    nodes: List[np.ndarray]
    parents: List[int]
    costs: List[float]
    children: List[List[int]]
    goal_parent: int = -1
    rewires: int = 0
    best_costs: List[float] = field(default_factory=list)

    def add(self, q: np.ndarray, parent: int, cost: float) -> int:
        self.nodes.append(q)
        self.parents.append(parent)
        self.costs.append(cost)
        self.children.append([])
        if parent >= 0:
            self.children[parent].append(len(self.nodes) - 1)
        return len(self.nodes) - 1

    def reparent(self, node: int, parent: int, cost: float) -> None:
        """Move a node under a new parent and shift its whole subtree's cost."""
        self.children[self.parents[node]].remove(node)
        self.parents[node] = parent
        self.children[parent].append(node)
        change = cost - self.costs[node]
        stack = [node]
        while stack:
            n = stack.pop()
            self.costs[n] += change
            stack.extend(self.children[n])
        self.rewires += 1

    def path_to(self, node: int) -> List[np.ndarray]:
        """Nodes from the root down to `node`."""
        path = []
        while node >= 0:
            path.append(self.nodes[node])
            node = self.parents[node]
        return path[::-1]


def angle_diff(a: float, b: float) -> float:
    """Signed shortest rotation from a to b, in (−π, π]."""
    d = math.fmod(b - a, TWO_PI)
    if d > math.pi:
        d -= TWO_PI
    elif d <= -math.pi:
        d += TWO_PI
    return d


class RrtStarPlanner:
    """Sampling-based planner producing collision-free configuration paths."""

    def __init__(self, workspace: Workspace, robot: RobotBody, cfg: Optional[PlannerConfig] = None):
        self.workspace = workspace
        self.robot = robot
        self.cfg = cfg or PlannerConfig()
        self.theta_weight = robot.r

    # === Metric and steering ===

    def distance(self, a: Sequence[float], b: Sequence[float]) -> float:
        dx, dy = b[0] - a[0], b[1] - a[1]
        dt = angle_diff(a[2], b[2]) * self.theta_weight
        return math.sqrt(dx * dx + dy * dy + dt * dt)

    def _distances(self, nodes: np.ndarray, q: np.ndarray) -> np.ndarray:
        d = nodes - q
        dt = np.mod(d[:, 2] + math.pi, TWO_PI) - math.pi
        return np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2 + (dt * self.theta_weight) ** 2)

    def interpolate(self, a: Sequence[float], b: Sequence[float], t: float) -> np.ndarray:
        dth = angle_diff(a[2], b[2])
        theta = math.fmod(a[2] + t * dth, TWO_PI)
        if theta < 0:
            theta += TWO_PI
        return np.array([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), theta])

    def steer(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        dist = self.distance(a, b)
        if dist <= self.cfg.step:
            return np.array(b, dtype=float)
        return self.interpolate(a, b, self.cfg.step / dist)

    def edge_free(self, a: Sequence[float], b: Sequence[float]) -> bool:
        """Footprints sampled every Δs along the edge all lie in W."""
        length = max(math.hypot(b[0] - a[0], b[1] - a[1]), abs(angle_diff(a[2], b[2])) * self.theta_weight)
        n = max(1, math.ceil(length / self.cfg.resolution))
        for i in range(1, n + 1):
            if not is_safe_configuration(self.workspace, self.robot, self.interpolate(a, b, i / n)):
                return False
        return True

    # === Planning ===

    def plan(self, start: Sequence[float], goal: Sequence[float], seed: Optional[int] = None) -> Trajectory:
        """
        Plan a path from start to goal.

        Args:
            start: Safe start configuration
            goal: Safe goal configuration
            seed: Overrides the configured seed

        Returns:
            Trajectory with waypoints from start to goal and its cost

        Raises:
            Unreachable: If no path is found within max_iters
        """
        start = np.asarray(start, dtype=float)
        goal = np.asarray(goal, dtype=float)
        if self.distance(start, goal) < 1e-12:
            return Trajectory(waypoints=start[None, :].copy(), collision_free=True, cost=0.0)
        if not is_safe_configuration(self.workspace, self.robot, start):
            raise Unreachable(f"Start configuration {start.tolist()} is in collision")
        if not is_safe_configuration(self.workspace, self.robot, goal):
            raise Unreachable(f"Goal configuration {goal.tolist()} is in collision")

        if self.edge_free(start, goal):
            return Trajectory(np.vstack([start, goal]), True, self.distance(start, goal))

        tree = self.search(start, goal, seed)
        if tree.goal_parent < 0:
            raise Unreachable(f"No path found within {self.cfg.max_iters} iterations")

        waypoints = self.shortcut(tree.path_to(tree.goal_parent) + [goal])
        cost = sum(self.distance(a, b) for a, b in zip(waypoints[:-1], waypoints[1:]))
        logger.debug("RRT* found a path with %d waypoints, cost %.4g (%d nodes)", len(waypoints), cost, len(tree.nodes))
        return Trajectory(waypoints=np.asarray(waypoints), collision_free=True, cost=cost)

    def search(self, start: Sequence[float], goal: Sequence[float], seed: Optional[int] = None) -> SearchTree:
        """
        Grow the RRT* tree from start until extra_iters past the first goal
        connection, or max_iters.

        Returns:
            SearchTree; goal_parent is -1 when the goal was never connected
        """
        start = np.asarray(start, dtype=float)
        goal = np.asarray(goal, dtype=float)
        cfg = self.cfg
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        xmin, ymin, xmax, ymax = self.workspace.bounds
        tree = SearchTree(nodes=[start], parents=[-1], costs=[0.0], children=[[]])
        best_cost = math.inf
        stop_at = cfg.max_iters

        for it in range(cfg.max_iters):
            if it >= stop_at:
                break
            if rng.random() < cfg.goal_bias:
                sample = goal
            else:
                sample = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax), rng.uniform(0.0, TWO_PI)])
            arr = np.asarray(tree.nodes)
            nearest = int(np.argmin(self._distances(arr, sample)))
            new = self.steer(tree.nodes[nearest], sample)
            if not self.edge_free(tree.nodes[nearest], new):
                tree.best_costs.append(best_cost)
                continue

            dists = self._distances(arr, new)
            near = np.flatnonzero(dists <= cfg.rewire_radius)
            parent, parent_cost = nearest, tree.costs[nearest] + dists[nearest]
            for j in near:
                c = tree.costs[j] + dists[j]
                if c < parent_cost and j != nearest and self.edge_free(tree.nodes[j], new):
                    parent, parent_cost = int(j), c
            new_id = tree.add(new, parent, float(parent_cost))

            for j in near:
                j = int(j)
                if j == parent:
                    continue
                c = parent_cost + dists[j]
                if c < tree.costs[j] and self.edge_free(new, tree.nodes[j]):
                    tree.reparent(j, new_id, float(c))

            to_goal = self.distance(new, goal)
            if to_goal <= cfg.step and parent_cost + to_goal < best_cost and self.edge_free(new, goal):
                if tree.goal_parent < 0:
                    stop_at = min(cfg.max_iters, it + 1 + cfg.extra_iters)
                tree.goal_parent, best_cost = new_id, parent_cost + to_goal

            if tree.goal_parent >= 0:
                # Rewiring may have lowered the cost of the current goal parent.
                best_cost = tree.costs[tree.goal_parent] + self.distance(tree.nodes[tree.goal_parent], goal)
            tree.best_costs.append(best_cost)

        return tree

    def shortcut(self, path: List[np.ndarray]) -> List[np.ndarray]:
        """Greedily connect each waypoint to the farthest later one it can see."""
        out = [path[0]]
        i = 0
        while i < len(path) - 1:
            j = len(path) - 1
            while j > i + 1 and not self.edge_free(path[i], path[j]):
                j -= 1
            out.append(path[j])
            i = j
        return out
