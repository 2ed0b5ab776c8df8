"""
Tests for the RRT* planner.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from reachsafe_core.domain.errors import Unreachable
from reachsafe_core.domain.intervals import TWO_PI
from reachsafe_core.services.geometry import build_workspace
from reachsafe_core.services.planner import PlannerConfig, RrtStarPlanner, angle_diff

C_SHAPE = [
    [3, 3], [7, 3], [7, 4.975], [6, 4.975], [6, 4], [4, 4],
    [4, 6], [6, 6], [6, 5.025], [7, 5.025], [7, 7], [3, 7],
]


class TestAngles:

    def test_shorter_arc(self):
        assert angle_diff(0.1, TWO_PI - 0.1) == pytest.approx(-0.2)
        assert angle_diff(TWO_PI - 0.1, 0.1) == pytest.approx(0.2)

    def test_half_turn_is_positive(self):
        assert angle_diff(0.0, math.pi) == pytest.approx(math.pi)

    def test_interpolate_wraps(self, empty_square, small_robot):
        planner = RrtStarPlanner(empty_square, small_robot)
        mid = planner.interpolate([0, 0, TWO_PI - 0.2], [2, 0, 0.2], 0.75)
        assert mid[0] == pytest.approx(1.5)
        assert mid[2] == pytest.approx(0.1)

    def test_steer_limits_step(self, empty_square, small_robot):
        planner = RrtStarPlanner(empty_square, small_robot, PlannerConfig(step=0.4))
        new = planner.steer(np.array([1.0, 1.0, 0.0]), np.array([5.0, 1.0, 0.0]))
        assert planner.distance([1.0, 1.0, 0.0], new) == pytest.approx(0.4)


class TestPlan:

    def test_start_equals_goal(self, empty_square, small_robot):
        traj = RrtStarPlanner(empty_square, small_robot).plan([5, 5, 1], [5, 5, 1])
        assert traj.waypoints.shape == (1, 3)
        assert traj.cost == 0.0

    def test_empty_corridor_is_straight(self, small_robot):
        corridor = build_workspace([[0, 0], [10, 0], [10, 2], [0, 2]])
        traj = RrtStarPlanner(corridor, small_robot).plan([1, 1, 0], [9, 1, 0])
        assert traj.cost <= 8.0 * 1.05
        np.testing.assert_allclose(traj.waypoints[0], [1, 1, 0])
        np.testing.assert_allclose(traj.waypoints[-1], [9, 1, 0])

    def test_sealed_goal_is_unreachable(self, small_robot):
        ws = build_workspace([[0, 0], [10, 0], [10, 10], [0, 10]], [C_SHAPE])
        planner = RrtStarPlanner(ws, small_robot, PlannerConfig(max_iters=200))
        with pytest.raises(Unreachable):
            planner.plan([1, 1, 0], [5, 5, 0])

    def test_colliding_start_is_unreachable(self, empty_square, small_robot):
        with pytest.raises(Unreachable):
            RrtStarPlanner(empty_square, small_robot).plan([0.0, 5.0, 0.0], [5, 5, 0])

    @pytest.mark.slow
    def test_detour_around_obstacle(self, small_robot):
        ws = build_workspace([[0, 0], [4, 0], [4, 4], [0, 4]], [[[1.5, 0.8], [2.5, 0.8], [2.5, 3.2], [1.5, 3.2]]])
        planner = RrtStarPlanner(ws, small_robot, PlannerConfig(max_iters=3000, seed=3))
        start, goal = [0.75, 2.0, 0.0], [3.25, 2.0, 0.0]
        traj = planner.plan(start, goal)
        np.testing.assert_allclose(traj.waypoints[0], start)
        np.testing.assert_allclose(traj.waypoints[-1], goal)
        for a, b in zip(traj.waypoints[:-1], traj.waypoints[1:]):
            assert planner.edge_free(a, b)
        assert traj.cost >= 2.5

        again = RrtStarPlanner(ws, small_robot, PlannerConfig(max_iters=3000, seed=3)).plan(start, goal)
        np.testing.assert_array_equal(traj.waypoints, again.waypoints)


class TestSearchTree:
    """Cost monotonicity and table consistency of the grown tree."""

    START, GOAL = [2.0, 2.0, 0.0], [4.5, 4.0, 1.0]

    def _search(self, empty_square, small_robot, extra_iters=150):
        cfg = PlannerConfig(max_iters=600, extra_iters=extra_iters, seed=5)
        return RrtStarPlanner(empty_square, small_robot, cfg).search(self.START, self.GOAL)

    def test_goal_cost_never_increases(self, empty_square, small_robot):
        tree = self._search(empty_square, small_robot)
        assert tree.goal_parent >= 0
        costs = np.array(tree.best_costs)
        first = int(np.argmax(np.isfinite(costs)))
        assert np.all(np.isinf(costs[:first]))
        assert np.all(np.diff(costs[first:]) <= 1e-12)

    def test_longer_search_extends_shorter_one(self, empty_square, small_robot):
        """Same seed: the longer run replays the shorter one and can only improve on it."""
        short = self._search(empty_square, small_robot, extra_iters=20)
        long = self._search(empty_square, small_robot, extra_iters=150)
        assert len(long.best_costs) > len(short.best_costs)
        assert long.best_costs[:len(short.best_costs)] == short.best_costs
        assert long.best_costs[-1] <= short.best_costs[-1]

    def test_tables_consistent_after_rewiring(self, empty_square, small_robot):
        tree = self._search(empty_square, small_robot)
        planner = RrtStarPlanner(empty_square, small_robot)
        n = len(tree.nodes)
        assert tree.rewires > 0
        assert tree.parents[0] == -1 and tree.costs[0] == 0.0
        assert sum(len(c) for c in tree.children) == n - 1
        for j in range(1, n):
            p = tree.parents[j]
            assert j in tree.children[p]
            assert tree.costs[j] == pytest.approx(tree.costs[p] + planner.distance(tree.nodes[p], tree.nodes[j]), abs=1e-9)
            steps, node = 0, j
            while node > 0:
                node, steps = tree.parents[node], steps + 1
                assert steps <= n

    @pytest.mark.slow
    def test_plan_follows_the_searched_tree(self, small_robot):
        ws = build_workspace([[0, 0], [4, 0], [4, 4], [0, 4]], [[[1.5, 0.8], [2.5, 0.8], [2.5, 3.2], [1.5, 3.2]]])
        planner = RrtStarPlanner(ws, small_robot, PlannerConfig(max_iters=3000, seed=3))
        start, goal = [0.75, 2.0, 0.0], [3.25, 2.0, 0.0]
        tree = planner.search(start, goal)
        traj = planner.plan(start, goal)
        assert traj.cost <= tree.best_costs[-1] + 1e-9
