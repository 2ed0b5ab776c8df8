"""
Demonstration Service - training data and closed-loop rollouts.

Provides:
1. Sampling safe start configurations
2. Planning many trajectories to a common goal (one derived seed each)
3. Extracting controls u′ = (z_{k+1} − z_k)/K and shaping them into a
   vector field that vanishes at the goal
4. Rolling a controller forward to check collisions and goal arrival
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..domain.enums import ShapingMode
from ..domain.errors import DegenerateStep, EmptyDataset, Unreachable
from ..domain.intervals import TWO_PI, ConfigBox
from ..domain.models import Dataset, RobotBody, RolloutResult, Trajectory, Workspace
from ..ports.dynamics_port import DynamicsPort
from .geometry import is_safe_configuration
from .network import Mlp, forward
from .parallel import ordered_map
from .planner import RrtStarPlanner, angle_diff

logger = logging.getLogger(__name__)

FIELD_GAIN = 10.0


@dataclass
class DataConfig:
    """Dataset generation settings."""
    n_trajectories: int = 500
    K: float = 0.01
    u_max: float = 50.0
    mode: ShapingMode = ShapingMode.SATURATING
    sample_spacing: float = 0.05
    goal: Tuple[float, float, float] = (5.2, 1.6, 0.0)
    max_attempts: int = 5

    def __post_init__(self):
        self.mode = ShapingMode(self.mode)
        self.goal = tuple(float(g) for g in self.goal)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_trajectories": self.n_trajectories,
            "K": self.K,
            "u_max": self.u_max,
            "mode": self.mode.value,
            "sample_spacing": self.sample_spacing,
            "goal": list(self.goal),
            "max_attempts": self.max_attempts,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DataConfig":
        return cls(**{k: data[k] for k in cls().to_dict() if k in data})


def state_error(z: Sequence[float], goal: Sequence[float]) -> np.ndarray:
    """z_g − z with the heading difference taken along the shorter arc."""
    e = np.asarray(goal, dtype=float) - np.asarray(z, dtype=float)
    e[2] = angle_diff(z[2], goal[2])
    return e


def shape_control(z: np.ndarray, z_next: np.ndarray, goal: Sequence[float], K: float,
                  mode: ShapingMode = ShapingMode.SATURATING, u_max: float = 50.0) -> np.ndarray:
    """
    Rescale the raw control so its magnitude depends only on the distance to the goal.

    Raises:
        DegenerateStep: If z_next equals z
    """
    step = z_next - z
    step[2] = angle_diff(z[2], z_next[2])
    raw = step / K
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        raise DegenerateStep(f"Consecutive samples coincide at {z.tolist()}")
    e = float(np.linalg.norm(state_error(z, goal)))
    if e == 0.0:
        return np.zeros_like(raw)
    if mode == ShapingMode.PAPER:
        if e == 1.0:
            scale = u_max
        else:
            scale = FIELD_GAIN * e / (1.0 - e)
            scale = math.copysign(min(abs(scale), u_max), scale)
    else:
        scale = min(FIELD_GAIN * e / (1.0 + e), u_max)
    return raw / norm * scale


def resample(traj: Trajectory, spacing: float, theta_weight: float = 1.0) -> np.ndarray:
    """Points along the polyline, at most `spacing` apart in the planner metric."""
    points = [traj.waypoints[0]]
    for a, b in zip(traj.waypoints[:-1], traj.waypoints[1:]):
        dth = angle_diff(a[2], b[2])
        length = math.sqrt((b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2 + (dth * theta_weight) ** 2)
        n = max(1, math.ceil(length / spacing))
        for i in range(1, n + 1):
            t = i / n
            theta = (a[2] + t * dth) % TWO_PI
            points.append(np.array([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), theta]))
    return np.asarray(points)


def build_dataset(trajs: Sequence[Trajectory], workspace: Workspace, robot: RobotBody, goal: Sequence[float],
                  cfg: DataConfig, seed: Optional[int] = None) -> Dataset:
    """
    Turn trajectories into (state, shaped control) pairs.

    Every emitted state passes the exact footprint check; the goal itself is
    emitted once with a zero control.

    Raises:
        EmptyDataset: If no pair survives
    """
    goal = np.asarray(goal, dtype=float)
    states, controls = [], []
    skipped = unsafe = 0
    for traj in trajs:
        points = resample(traj, cfg.sample_spacing, robot.r)
        for z, z_next in zip(points[:-1], points[1:]):
            if not is_safe_configuration(workspace, robot, z):
                unsafe += 1
                continue
            try:
                u = shape_control(z, z_next, goal, cfg.K, cfg.mode, cfg.u_max)
            except DegenerateStep:
                skipped += 1
                continue
            states.append(z)
            controls.append(u)
    if is_safe_configuration(workspace, robot, goal) and trajs:
        states.append(goal.copy())
        controls.append(np.zeros(3))
    if skipped or unsafe:
        logger.warning("Skipped %d degenerate and %d unsafe samples", skipped, unsafe)
    if not states:
        raise EmptyDataset("No demonstration pairs could be extracted")
    metadata = {
        "goal": goal.tolist(),
        "K": cfg.K,
        "count": len(states),
        "trajectories": len(trajs),
        "requested": cfg.n_trajectories,
        "complete": len(trajs) >= cfg.n_trajectories,
        "seed": seed,
        "mode": cfg.mode.value,
    }
    return Dataset(states=np.asarray(states), controls=np.asarray(controls), goal=goal, metadata=metadata)


def sample_safe_configuration(workspace: Workspace, robot: RobotBody, rng: np.random.Generator,
                              max_tries: int = 10_000) -> np.ndarray:
    xmin, ymin, xmax, ymax = workspace.bounds
    box = ConfigBox.from_bounds((xmin, ymin, 0.0), (xmax, ymax, TWO_PI))
    for _ in range(max_tries):
        p = rng.uniform(box.lo, box.hi)
        if is_safe_configuration(workspace, robot, p):
            return p
    raise Unreachable("Could not sample a safe configuration")


def generate_trajectories(planner: RrtStarPlanner, goal: Sequence[float], n: int, seed: int,
                          threads: int = 1, max_attempts: int = 5) -> List[Trajectory]:
    """
    Plan n trajectories from random safe starts, in trajectory-index order.

    Trajectory i uses a child of SeedSequence(seed) for its start and its
    planner; failed plans retry from a new start up to max_attempts times.
    """
    children = np.random.SeedSequence(seed).spawn(n)

    def plan_one(index: int) -> Optional[Trajectory]:
        rng = np.random.default_rng(children[index])
        for attempt in range(max_attempts):
            start = sample_safe_configuration(planner.workspace, planner.robot, rng)
            try:
                return planner.plan(start, goal, seed=int(rng.integers(2 ** 31)))
            except Unreachable as e:
                logger.warning("Trajectory %d attempt %d failed: %s", index, attempt + 1, e)
        return None

    results = ordered_map(plan_one, range(n), threads)
    trajs = [t for t in results if t is not None]
    logger.info("Planned %d of %d trajectories", len(trajs), n)
    return trajs


def rollout(net: Mlp, dynamics: DynamicsPort, z0: Sequence[float], n_steps: int, workspace: Workspace,
            robot: RobotBody, goal: Optional[Sequence[float]] = None, goal_tolerance: float = 0.1) -> RolloutResult:
    """
    Iterate z_{k+1} = f(z_k, φ(z_k)).

    Stops at the first footprint collision or when the planar position is
    within goal_tolerance of the goal.
    """
    z = np.asarray(z0, dtype=float).copy()
    states = [z.copy()]
    collision_step = None
    reached = False

    def at_goal(state: np.ndarray) -> bool:
        return goal is not None and math.hypot(state[0] - goal[0], state[1] - goal[1]) <= goal_tolerance

    if not is_safe_configuration(workspace, robot, z):
        return RolloutResult(states=np.asarray(states), collision_step=0, reached=False)
    reached = at_goal(z)
    for k in range(1, n_steps + 1):
        if reached:
            break
        z = dynamics.step(z, forward(net, z))
        states.append(z.copy())
        if not is_safe_configuration(workspace, robot, z):
            collision_step = k
            break
        reached = at_goal(z)
    return RolloutResult(states=np.asarray(states), collision_step=collision_step, reached=reached)
