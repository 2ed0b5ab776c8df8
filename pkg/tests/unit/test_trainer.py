"""
Tests for the coverage metric, the losses and their gradients, Adam and
the training pipeline.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from reachsafe_core.adapters.holonomic import HolonomicDynamics
from reachsafe_core.domain.enums import CellLabel
from reachsafe_core.domain.errors import EmptyDataset, EmptyPartition
from reachsafe_core.domain.intervals import TWO_PI, ConfigBox, StateBox
from reachsafe_core.domain.models import Dataset, PartitionTree
from reachsafe_core.services.coverage import coverage, metric_v
from reachsafe_core.services.demonstrations import rollout
from reachsafe_core.services.geometry import build_robot
from reachsafe_core.services.network import Mlp, init_mlp
from reachsafe_core.services.reachability import ReachabilityService
from reachsafe_core.services.trainer import (
    Adam, LossConfig, OptimizerConfig, PipelineConfig, ScheduleConfig, TrainState,
    base_loss_and_grad, penalty_and_grad, run_pipeline, train_base,
)

ONES = (1.0, 1.0, 1.0)


def perturbed(net: Mlp, index: int, h: float) -> Mlp:
    flat = np.concatenate([np.concatenate([l.weights.ravel(), l.bias]) for l in net.layers])
    flat[index] += h
    weights, biases, pos = [], [], 0
    for layer in net.layers:
        weights.append(flat[pos:pos + layer.weights.size].reshape(layer.weights.shape))
        pos += layer.weights.size
        biases.append(flat[pos:pos + layer.bias.size])
        pos += layer.bias.size
    return net.with_params(weights, biases)


def zero_net(arch=(3, 4, 3)) -> Mlp:
    net = init_mlp(list(arch), 0)
    return net.with_params([0 * l.weights for l in net.layers], [0 * l.bias for l in net.layers])


def small_dataset(rng, n=6) -> Dataset:
    states = rng.uniform([0.3, 0.3, 0.0], [0.9, 2.7, TWO_PI], size=(n, 3))
    controls = rng.normal(0, 0.5, size=(n, 3))
    return Dataset(states=states, controls=controls, goal=np.array([2.5, 2.5, 0.0]))


def tree_of(cells, eps=(1.0, 1.0, 1.0)) -> PartitionTree:
    tree = PartitionTree(eps_w=eps)
    for lo, hi, label in cells:
        cell = tree.new_cell(StateBox(ConfigBox.from_bounds(lo, hi)), label=label)
        tree.add_leaf(cell.id)
    return tree


class TestCoverageMetric:
    """V(X) = max(0, Vol^{1/3} − (covered + ε_smooth)^{1/3})."""

    SAFE_LO = np.array([[0.0, 0.0, 0.0]])
    SAFE_HI = np.array([[1.0, 2.0, 2.0]])

    def test_inside_one_safe_cell(self):
        v = metric_v([0.2, 0.2, 0.2], [0.8, 1.0, 1.0], self.SAFE_LO, self.SAFE_HI, ONES)
        assert v == 0.0

    def test_half_covered_box(self):
        v = metric_v([0, 0, 0], [2, 2, 2], self.SAFE_LO, self.SAFE_HI, ONES, eps_smooth=0.0)
        assert v == pytest.approx(2.0 - 4.0 ** (1.0 / 3.0), abs=1e-12)
        assert v == pytest.approx(0.41259, abs=1e-5)

    def test_disjoint_box(self):
        v = metric_v([5, 5, 0], [7, 7, 2], self.SAFE_LO, self.SAFE_HI, ONES, eps_smooth=0.0)
        assert v == pytest.approx(2.0)

    def test_theta_seam_is_wrapped(self):
        safe_lo = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, TWO_PI - 0.5]])
        safe_hi = np.array([[1.0, 1.0, 0.5], [1.0, 1.0, TWO_PI]])
        v = metric_v([0, 0, -0.5], [1, 1, 0.5], safe_lo, safe_hi, ONES)
        assert v == 0.0

    def test_outside_volume(self):
        cov = coverage(np.array([[0, 0, 0]]), np.array([[2, 2, 2]]), self.SAFE_LO, self.SAFE_HI, ONES)
        assert cov.outside[0] == pytest.approx(4.0)
        assert cov.active[0]

    def test_gradient_matches_finite_differences(self, rng):
        safe_lo = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        safe_hi = np.array([[1.0, 1.0, 1.0], [2.0, 0.5, 1.0]])
        lo = np.array([[0.3, 0.2, 0.1]])
        hi = np.array([[1.4, 0.8, 1.3]])
        cov = coverage(lo, hi, safe_lo, safe_hi, ONES, with_grad=True)
        h = 1e-6

        def v_at(l, u):
            return coverage(l, u, safe_lo, safe_hi, ONES).v[0]

        for d in range(3):
            step = np.zeros_like(lo)
            step[0, d] = h
            fd_lo = (v_at(lo + step, hi) - v_at(lo - step, hi)) / (2 * h)
            fd_hi = (v_at(lo, hi + step) - v_at(lo, hi - step)) / (2 * h)
            assert cov.dv_dlo[0, d] == pytest.approx(fd_lo, rel=1e-5, abs=1e-8)
            assert cov.dv_dhi[0, d] == pytest.approx(fd_hi, rel=1e-5, abs=1e-8)


class TestSchedule:

    def test_ramp_reaches_target_on_time(self):
        sched = ScheduleConfig(step=1e-3, target=1e-2)
        assert sched.epochs_to_target == 10
        assert sched.value(0) == 0.0
        assert sched.value(9) < 1e-2
        assert sched.value(10) == 1e-2
        assert sched.value(50) == 1e-2

    def test_ramp_is_monotone(self):
        sched = ScheduleConfig(step=0.3, target=1.0)
        values = [sched.value(i) for i in range(10)]
        assert values == sorted(values)
        assert sched.epochs_to_target == 4
        assert values[4] == 1.0 and values[3] < 1.0

    def test_zero_target(self):
        sched = ScheduleConfig(step=1e-3, target=0.0)
        assert sched.epochs_to_target == 0
        assert sched.value(5) == 0.0

    def test_negative_values_rejected(self):
        with pytest.raises(ValueError):
            ScheduleConfig(step=-1.0)


class TestBaseLoss:

    def test_empty_dataset(self):
        empty = Dataset(states=np.zeros((0, 3)), controls=np.zeros((0, 3)), goal=np.zeros(3))
        with pytest.raises(EmptyDataset):
            base_loss_and_grad(zero_net(), empty, LossConfig())
        with pytest.raises(EmptyDataset):
            train_base(empty, [3, 4, 3], LossConfig(), OptimizerConfig(epochs=1))

    def test_exact_fit_has_zero_loss(self):
        u = np.array([0.5, -0.3, 0.2])
        net = zero_net()
        net = net.with_params([l.weights for l in net.layers], [net.layers[0].bias, u])
        data = Dataset(states=np.array([[1.0, 2.0, 3.0]]), controls=u[None, :], goal=np.zeros(3))
        J, g = base_loss_and_grad(net, data, LossConfig(lambda_R=0.0))
        assert J == 0.0
        assert g.norm() == 0.0

    def test_ridge_only(self, rng):
        net = init_mlp([3, 5, 3], 1)
        J, g = base_loss_and_grad(net, small_dataset(rng), LossConfig(lambda_E=0.0, lambda_R=0.5))
        assert J == pytest.approx(0.5 * net.sum_of_squares())
        flat = np.concatenate([np.concatenate([l.weights.ravel(), l.bias]) for l in net.layers])
        np.testing.assert_allclose(g.flat(), flat)

    def test_default_weights(self):
        assert LossConfig().weights(4, 5553) == (0.25, 1.0 / 5553)

    def test_gradient_matches_finite_differences(self, rng):
        net = init_mlp([3, 4, 3], 2)
        data = small_dataset(rng)
        cfg = LossConfig()
        _, g = base_loss_and_grad(net, data, cfg)
        h = 1e-5
        fd = np.array([
            (base_loss_and_grad(perturbed(net, i, h), data, cfg)[0]
             - base_loss_and_grad(perturbed(net, i, -h), data, cfg)[0]) / (2 * h)
            for i in range(net.param_count)
        ])
        assert np.linalg.norm(g.flat() - fd) / np.linalg.norm(fd) <= 1e-5


class TestPenalty:
    """S = Σ V² over reach boxes and its gradient through IBP."""

    def test_half_covered_cell(self, empty_square, unit_robot):
        tree = tree_of([
            ([0, 0, 0], [2, 2, 2], CellLabel.MIXED),
            ([0, 0, 0], [1, 2, 2], CellLabel.SAFE),
        ])
        reach = ReachabilityService(empty_square, unit_robot, HolonomicDynamics())
        S, _ = penalty_and_grad(zero_net(), tree, reach, LossConfig(delta=ONES, eps_smooth=0.0))
        assert S == pytest.approx((2.0 - 4.0 ** (1.0 / 3.0)) ** 2, abs=1e-12)
        assert S == pytest.approx(0.17023, abs=1e-5)

    def test_all_safe_cover_has_zero_penalty(self, empty_square, unit_robot):
        tree = tree_of([([4, 4, 0], [5, 5, 1], CellLabel.SAFE), ([5, 4, 0], [6, 5, 1], CellLabel.SAFE)])
        reach = ReachabilityService(empty_square, unit_robot, HolonomicDynamics())
        S, g = penalty_and_grad(zero_net(), tree, reach, LossConfig())
        assert S == 0.0 and g.norm() == 0.0
        assert reach.violation_report(tree, zero_net()).active_cells == 0

    def _straddling_setup(self, empty_square, unit_robot):
        tree = tree_of([
            ([0.0, 0.0, 0.0], [0.5, 1.0, TWO_PI], CellLabel.SAFE),
            ([0.3, 0.3, 1.0], [0.7, 0.7, 1.2], CellLabel.MIXED),
        ])
        reach = ReachabilityService(empty_square, unit_robot, HolonomicDynamics(K=0.05))
        return tree, reach

    def test_gradient_matches_finite_differences(self, empty_square, unit_robot):
        tree, reach = self._straddling_setup(empty_square, unit_robot)
        cfg = LossConfig()
        for seed in range(3):
            net = init_mlp([3, 4, 3], seed)
            S, g = penalty_and_grad(net, tree, reach, cfg, [1])
            assert S > 0.0
            h = 1e-5
            fd = np.array([
                (penalty_and_grad(perturbed(net, i, h), tree, reach, cfg, [1])[0]
                 - penalty_and_grad(perturbed(net, i, -h), tree, reach, cfg, [1])[0]) / (2 * h)
                for i in range(net.param_count)
            ])
            assert np.linalg.norm(g.flat() - fd) / np.linalg.norm(fd) <= 1e-3

    def test_gradient_step_decreases_penalty(self, empty_square, unit_robot):
        tree, reach = self._straddling_setup(empty_square, unit_robot)
        cfg = LossConfig()
        for seed in range(20):
            net = init_mlp([3, 4, 3], seed)
            S, g = penalty_and_grad(net, tree, reach, cfg, [1])
            lr, improved = 1e-1, False
            while lr > 1e-10 and not improved:
                step = net.with_params(
                    [l.weights - lr * gw for l, gw in zip(net.layers, g.weights)],
                    [l.bias - lr * gb for l, gb in zip(net.layers, g.biases)],
                )
                improved = penalty_and_grad(step, tree, reach, cfg, [1])[0] < S
                lr *= 0.5
            assert improved


class TestAdamAndBaseFit:

    def test_single_point_fit(self):
        data = Dataset(states=np.array([[0.2, 0.3, 0.1]]), controls=np.array([[0.5, -0.3, 0.2]]),
                       goal=np.zeros(3))
        state = train_base(data, [3, 16, 3], LossConfig(lambda_R=0.0), OptimizerConfig(epochs=2000))
        assert state.base_losses[-1] < 1e-4
        assert len(state.base_losses) == 2001

    def test_same_seed_same_network(self, rng):
        data = small_dataset(rng)
        a = train_base(data, [3, 6, 3], LossConfig(), OptimizerConfig(epochs=30, seed=3)).net
        b = train_base(data, [3, 6, 3], LossConfig(), OptimizerConfig(epochs=30, seed=3)).net
        assert all(np.array_equal(x.weights, y.weights) for x, y in zip(a.layers, b.layers))

    def test_ridge_only_shrinks_parameters(self, rng):
        data = small_dataset(rng)
        net = init_mlp([3, 16, 3], 0)
        opt = Adam(net, OptimizerConfig())
        cfg = LossConfig(lambda_E=0.0)
        previous = net.sum_of_squares()
        for _ in range(100):
            _, g = base_loss_and_grad(net, data, cfg)
            net = opt.step(net, g)
            assert net.sum_of_squares() <= previous
            previous = net.sum_of_squares()


class TestPipeline:
    """Outer loop: refine, ramp λ_S, retrain, report."""

    def _config(self, target, **overrides):
        cfg = PipelineConfig(
            optimizer=OptimizerConfig(epochs=5, inner_steps=3, seed=1),
            schedule=ScheduleConfig(step=0.05, target=target),
            eps_w=(0.5, 0.5, 0.5 * math.pi),
            n_epochs=2,
        )
        for key, value in overrides.items():
            setattr(cfg, key, value)
        return cfg

    def test_zero_penalty_weight_matches_base_continuation(self, small_room, small_robot, rng):
        data = small_dataset(rng)
        cfg = self._config(target=0.0)
        result = run_pipeline(small_room, small_robot, data, [3, 4, 3], HolonomicDynamics(), cfg)
        direct = train_base(data, [3, 4, 3], cfg.loss, OptimizerConfig(epochs=5 + 2 * 3, seed=1)).net
        assert all(np.array_equal(x.weights, y.weights) and np.array_equal(x.bias, y.bias)
                   for x, y in zip(result.net.layers, direct.layers))

    def test_reports_every_epoch(self, small_room, small_robot, rng):
        data = small_dataset(rng)
        seen = []
        result = run_pipeline(small_room, small_robot, data, [3, 4, 3], HolonomicDynamics(),
                              self._config(target=0.1), on_report=seen.append)
        assert [r.epoch for r in result.history] == [0, 1, 2]
        assert seen == result.history
        assert [r.lambda_S for r in result.history] == [0.0, 0.05, 0.1]
        assert all(r.wall_time_s is None for r in result.history)
        assert len(result.base_losses) == 6

    def test_runs_are_reproducible(self, small_room, small_robot):
        runs = []
        for _ in range(2):
            data = small_dataset(np.random.default_rng(0))
            result = run_pipeline(small_room, small_robot, data, [3, 4, 3], HolonomicDynamics(),
                                  self._config(target=0.1))
            runs.append(result)
        assert [r.to_dict() for r in runs[0].history] == [r.to_dict() for r in runs[1].history]
        assert runs[0].tree.to_dict() == runs[1].tree.to_dict()

    def test_empty_partition(self, small_room, rng):
        giant = build_robot([[-5, -5], [5, -5], [5, 5], [-5, 5]])
        with pytest.raises(EmptyPartition):
            run_pipeline(small_room, giant, small_dataset(rng), [3, 4, 3], HolonomicDynamics(),
                         self._config(target=0.1))


@pytest.mark.slow
class TestRetrainingImprovesSafety:
    """
    A controller that drives every state 1 m towards −x per step, retrained
    on the penalty alone (λ_E = λ_R = 0), in the one-obstacle room.
    """

    STARTS = [[1.0, 1.0, 0.0], [1.0, 1.5, 0.0], [1.0, 2.0, 0.0], [0.6, 1.5, 0.0]]

    def _state(self):
        net = zero_net()
        biases = [l.bias for l in net.layers]
        biases[-1] = np.array([-100.0, 0.0, 0.0])
        net = net.with_params([l.weights for l in net.layers], biases)
        opt = OptimizerConfig(lr=2.0, epochs=0, inner_steps=10, seed=0)
        return TrainState(net=net, optimizer=Adam(net, opt)), opt

    def _run(self, room, robot, target):
        state, opt = self._state()
        cfg = PipelineConfig(
            loss=LossConfig(lambda_E=0.0, lambda_R=0.0),
            optimizer=opt,
            schedule=ScheduleConfig(step=target, target=target),
            eps_w=(0.25, 0.25, 0.25 * math.pi),
            n_epochs=8,
        )
        data = small_dataset(np.random.default_rng(0))
        return run_pipeline(room, robot, data, [3, 4, 3], HolonomicDynamics(K=0.01), cfg, state=state)

    def _collisions(self, net, room, robot):
        runs = [rollout(net, HolonomicDynamics(K=0.01), z0, 3, room, robot) for z0 in self.STARTS]
        return sum(r.collision_step is not None for r in runs)

    def test_without_penalty_nothing_changes(self, small_room, small_robot):
        result = self._run(small_room, small_robot, target=0.0)
        first, last = result.history[0], result.history[-1]
        assert last.violation_volume == first.violation_volume
        assert last.active_cells == first.active_cells
        np.testing.assert_array_equal(result.net.layers[-1].bias, [-100.0, 0.0, 0.0])

    def test_penalty_reduces_violation_and_collisions(self, small_room, small_robot):
        result = self._run(small_room, small_robot, target=1.0)
        first, last = result.history[0], result.history[-1]

        def lost(rep):
            return rep.violation_volume + rep.residual_unsafe_volume

        assert lost(last) < lost(first)
        assert last.active_cells < first.active_cells
        assert abs(result.net.layers[-1].bias[0]) < 100.0

        before, _ = self._state()
        assert self._collisions(before.net, small_room, small_robot) == len(self.STARTS)
        assert self._collisions(result.net, small_room, small_robot) < len(self.STARTS)
