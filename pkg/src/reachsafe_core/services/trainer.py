"""
Safety-aware Training Pipeline.

This service manages:
1. The base regression loss J = λ_E Σ‖u − φ(z)‖² + λ_R Σθ² and its gradient
2. The safety penalty S = Σ_X V(F̄(X), P_A)² and its gradient through IBP
3. Full-batch Adam descent (base fit, then penalised retraining)
4. The λ_S ramp and the outer partition → refine → retrain loop

All arithmetic is deterministic for a fixed seed; worker threads only
evaluate geometry, whose results are reduced in leaf-id order.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..domain.enums import CellLabel
from ..domain.errors import EmptyDataset, EmptyPartition
from ..domain.intervals import Box
from ..domain.models import Dataset, PartitionTree, RobotBody, ViolationReport, Workspace
from ..ports.dynamics_port import DynamicsPort
from .coverage import coverage
from .network import Mlp, ParamGrad, backward, forward_batch, ibp_backward, init_mlp
from .partitioner import PartitionBuilder
from .reachability import ReachabilityService, default_delta

logger = logging.getLogger(__name__)


# === Configuration ===

@dataclass
class LossConfig:
    """Loss weights; None picks λ_E = 1/|D| and λ_R = 1/(#parameters)."""
    lambda_E: Optional[float] = None
    lambda_R: Optional[float] = None
    delta: Optional[Tuple[float, ...]] = None
    eps_smooth: float = 1e-12

    def __post_init__(self):
        for name in ("lambda_E", "lambda_R"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")
        if self.eps_smooth < 0:
            raise ValueError("eps_smooth must be non-negative")

    def weights(self, n_data: int, n_params: int) -> Tuple[float, float]:
        lambda_E = self.lambda_E if self.lambda_E is not None else 1.0 / n_data
        lambda_R = self.lambda_R if self.lambda_R is not None else 1.0 / n_params
        return lambda_E, lambda_R

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda_E": self.lambda_E,
            "lambda_R": self.lambda_R,
            "delta": list(self.delta) if self.delta is not None else None,
            "eps_smooth": self.eps_smooth,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LossConfig":
        delta = data.get("delta")
        return cls(
            lambda_E=data.get("lambda_E"),
            lambda_R=data.get("lambda_R"),
            delta=tuple(delta) if delta is not None else None,
            eps_smooth=float(data.get("eps_smooth", 1e-12)),
        )


@dataclass
class OptimizerConfig:
    """Adam settings; `epochs` drives the base fit, `inner_steps` each retraining epoch."""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 2000
    inner_steps: int = 200
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OptimizerConfig":
        known = {k: data[k] for k in cls().__dict__ if k in data}
        return cls(**known)


@dataclass
class ScheduleConfig:
    """λ_S(i) = min(step·i, target)."""
    step: float = 1e-3
    target: float = 1e-2

    def __post_init__(self):
        if self.step < 0 or self.target < 0:
            raise ValueError("Schedule step and target must be non-negative")

    @property
    def epochs_to_target(self) -> int:
        if self.target == 0:
            return 0
        if self.step == 0:
            raise ValueError("A positive target needs a positive step")
        return math.ceil(self.target / self.step - 1e-9)

    def value(self, epoch: int) -> float:
        if epoch >= self.epochs_to_target:
            return self.target
        return min(self.step * epoch, self.target)

    def to_dict(self) -> Dict[str, Any]:
        return {"step": self.step, "target": self.target}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScheduleConfig":
        return cls(step=float(data.get("step", 1e-3)), target=float(data.get("target", 1e-2)))


@dataclass
class PipelineConfig:
    """Everything the outer training loop needs besides the inputs."""
    loss: LossConfig = field(default_factory=LossConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    eps_w: Tuple[float, float, float] = (0.25, 0.25, 0.2 * math.pi)
    eps_p: float = 1e-2
    eps_q: float = 1e-2
    n_epochs: int = 50
    theta_sectors: Optional[int] = None
    unsafe_search_depth: int = 3
    threads: int = 1
    record_wall_time: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "loss": self.loss.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "schedule": self.schedule.to_dict(),
            "eps_w": list(self.eps_w),
            "eps_p": self.eps_p,
            "eps_q": self.eps_q,
            "n_epochs": self.n_epochs,
            "theta_sectors": self.theta_sectors,
            "unsafe_search_depth": self.unsafe_search_depth,
            "threads": self.threads,
            "record_wall_time": self.record_wall_time,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PipelineConfig":
        defaults = cls()
        sectors = data.get("theta_sectors", defaults.theta_sectors)
        return cls(
            loss=LossConfig.from_dict(data.get("loss", {})),
            optimizer=OptimizerConfig.from_dict(data.get("optimizer", {})),
            schedule=ScheduleConfig.from_dict(data.get("schedule", {})),
            eps_w=tuple(float(e) for e in data.get("eps_w", defaults.eps_w)),
            eps_p=float(data.get("eps_p", defaults.eps_p)),
            eps_q=float(data.get("eps_q", defaults.eps_q)),
            n_epochs=int(data.get("n_epochs", defaults.n_epochs)),
            theta_sectors=None if sectors is None else int(sectors),
            unsafe_search_depth=int(data.get("unsafe_search_depth", defaults.unsafe_search_depth)),
            threads=int(data.get("threads", defaults.threads)),
            record_wall_time=bool(data.get("record_wall_time", False)),
        )


# === Optimizer ===

class Adam:
    """Adam over an Mlp's parameter arrays."""

    def __init__(self, net: Mlp, cfg: OptimizerConfig):
        self.cfg = cfg
        self.t = 0
        self.m = ParamGrad.zeros_like(net)
        self.v = ParamGrad.zeros_like(net)

    def step(self, net: Mlp, g: ParamGrad) -> Mlp:
        """Return the network after one update with gradient g."""
        cfg = self.cfg
        self.t += 1
        c1 = 1.0 - cfg.beta1 ** self.t
        c2 = 1.0 - cfg.beta2 ** self.t
        new_w, new_b = [], []
        for i, layer in enumerate(net.layers):
            for params, grads, m, v, out in (
                (layer.weights, g.weights, self.m.weights, self.v.weights, new_w),
                (layer.bias, g.biases, self.m.biases, self.v.biases, new_b),
            ):
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grads[i]
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grads[i] ** 2
                out.append(params - cfg.lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + cfg.eps))
        return net.with_params(new_w, new_b)


@dataclass
class TrainState:
    """Mutable state of a training run."""
    net: Mlp
    optimizer: Adam
    epoch: int = 0
    history: List[ViolationReport] = field(default_factory=list)
    base_losses: List[float] = field(default_factory=list)


@dataclass
class PipelineResult:
    net: Mlp
    tree: PartitionTree
    history: List[ViolationReport]
    base_losses: List[float] = field(default_factory=list)
    base_tree: Optional[PartitionTree] = None


# === Losses ===

def base_loss_and_grad(net: Mlp, dataset: Dataset, cfg: LossConfig) -> Tuple[float, ParamGrad]:
    """
    Regression loss with ridge regularisation.

    Raises:
        EmptyDataset: If the dataset has no points
    """
    if len(dataset) == 0:
        raise EmptyDataset("Base loss needs at least one data point")
    lambda_E, lambda_R = cfg.weights(len(dataset), net.param_count)
    out, cache = forward_batch(net, dataset.states)
    residual = out - dataset.controls
    J = lambda_E * float(np.sum(residual ** 2)) + lambda_R * net.sum_of_squares()
    g = backward(net, cache, 2.0 * lambda_E * residual)
    g = g + ParamGrad.from_params(net).scaled(2.0 * lambda_R)
    return J, g


def penalty_and_grad(net: Mlp, tree: PartitionTree, reach: ReachabilityService, cfg: LossConfig,
                     cell_ids: Optional[Sequence[int]] = None) -> Tuple[float, ParamGrad]:
    """
    S = Σ V(F̄(X), P_A)² over the given leaves (all leaves by default).

    The gradient chains V → reach-box bounds → dynamics → IBP → parameters.
    """
    ids = list(cell_ids) if cell_ids is not None else tree.leaf_ids()
    if not ids:
        return 0.0, ParamGrad.zeros_like(net)
    lo = np.array([tree.cells[i].box.lo for i in ids], dtype=float)
    hi = np.array([tree.cells[i].box.hi for i in ids], dtype=float)
    delta = cfg.delta if cfg.delta is not None else default_delta(lo.shape[1])
    r_lo, r_hi, cache = reach.reach_bounds(net, lo, hi)
    safe_lo, safe_hi = tree.leaf_bounds(CellLabel.SAFE)
    cov = coverage(r_lo, r_hi, safe_lo, safe_hi, delta, cfg.eps_smooth, with_grad=True)

    S = float(np.sum(cov.v ** 2))
    if S == 0.0:
        return 0.0, ParamGrad.zeros_like(net)
    g_lo = 2.0 * cov.v[:, None] * cov.dv_dlo
    g_hi = 2.0 * cov.v[:, None] * cov.dv_dhi
    u_lo, u_hi = reach.dynamics.step_box_vjp(g_lo, g_hi)
    return S, ibp_backward(net, cache, u_lo, u_hi)


# === Drivers ===

def train_base(dataset: Dataset, arch: Sequence[int], loss_cfg: LossConfig,
               opt_cfg: OptimizerConfig, state: Optional[TrainState] = None) -> TrainState:
    """
    Full-batch Adam on the base loss for `opt_cfg.epochs` steps.

    Args:
        dataset: Demonstration pairs
        arch: Layer sizes, used when no state is given
        loss_cfg: Loss weights
        opt_cfg: Adam settings and seed
        state: Continue from an existing state instead of a fresh network

    Returns:
        TrainState with the fitted network and the loss after every step
    """
    if len(dataset) == 0:
        raise EmptyDataset("Cannot train on an empty dataset")
    if state is None:
        net = init_mlp(arch, opt_cfg.seed)
        state = TrainState(net=net, optimizer=Adam(net, opt_cfg))
    for _ in range(opt_cfg.epochs):
        J, g = base_loss_and_grad(state.net, dataset, loss_cfg)
        state.base_losses.append(J)
        state.net = state.optimizer.step(state.net, g)
    final, _ = base_loss_and_grad(state.net, dataset, loss_cfg)
    state.base_losses.append(final)
    logger.info("Base fit finished: J=%.6g after %d steps", final, opt_cfg.epochs)
    return state


def run_pipeline(workspace: Workspace, robot: RobotBody, dataset: Dataset, arch: Sequence[int],
                 dynamics: DynamicsPort, cfg: PipelineConfig, q_box: Optional[Box] = None,
                 state: Optional[TrainState] = None,
                 on_report: Optional[Callable[[ViolationReport], None]] = None) -> PipelineResult:
    """
    Base fit, partition, then alternate refinement and penalised retraining.

    Each epoch refines the initial partition against the current network,
    sets λ_S from the ramp, runs `inner_steps` Adam steps on J + λ_S·S over
    the cells active at the start of the epoch, and reports.

    Args:
        workspace, robot: Environment
        dataset: Demonstrations for the base loss
        arch: Layer sizes when training from scratch
        dynamics: One-step model
        cfg: Pipeline settings
        q_box: Safe misc-state interval (defaults to the empty box)
        state: Start from an already trained state and skip the base fit
        on_report: Called with each report as soon as it is available

    Raises:
        EmptyPartition: If the initial partition has no leaves
    """
    q_box = q_box if q_box is not None else Box.empty_dims()
    if state is None:
        state = train_base(dataset, arch, cfg.loss, cfg.optimizer)

    builder = PartitionBuilder(workspace, robot, cfg.threads, cfg.unsafe_search_depth)
    base_tree = builder.build_partition(q_box, cfg.eps_w, cfg.theta_sectors)
    if not base_tree.leaves:
        raise EmptyPartition("The initial partition has no leaves; the robot fits nowhere in the workspace")
    reach = ReachabilityService(workspace, robot, dynamics, cfg.threads)
    delta = cfg.loss.delta

    def report(epoch: int, tree: PartitionTree, residual: float, lambda_S: float, started: float) -> ViolationReport:
        rep = reach.violation_report(tree, state.net, delta, epoch, cfg.loss.eps_smooth, residual)
        J, _ = base_loss_and_grad(state.net, dataset, cfg.loss)
        S = penalty_and_grad(state.net, tree, reach, cfg.loss)[0] if lambda_S > 0 else 0.0
        rep.J, rep.J_S, rep.lambda_S = J, J + lambda_S * S, lambda_S
        if cfg.record_wall_time:
            rep.wall_time_s = time.perf_counter() - started
        state.history.append(rep)
        logger.info("epoch %d: violation %.6g, active %d, J %.6g", epoch, rep.violation_volume, rep.active_cells, J)
        if on_report:
            on_report(rep)
        return rep

    started = time.perf_counter()
    refined = reach.refine_partition(base_tree, state.net, cfg.eps_p, cfg.eps_q)
    report(0, refined.tree, refined.residual_unsafe_volume, 0.0, started)

    for epoch in range(1, cfg.n_epochs + 1):
        started = time.perf_counter()
        refined = reach.refine_partition(base_tree, state.net, cfg.eps_p, cfg.eps_q)
        tree = refined.tree
        lambda_S = cfg.schedule.value(epoch)
        active = reach.active_cell_ids(tree, state.net, delta, cfg.loss.eps_smooth) if lambda_S > 0 else []
        for _ in range(cfg.optimizer.inner_steps):
            _, g = base_loss_and_grad(state.net, dataset, cfg.loss)
            if active:
                _, g_s = penalty_and_grad(state.net, tree, reach, cfg.loss, active)
                g = g + g_s.scaled(lambda_S)
            state.net = state.optimizer.step(state.net, g)
        state.epoch = epoch
        report(epoch, tree, refined.residual_unsafe_volume, lambda_S, started)

    return PipelineResult(net=state.net, tree=refined.tree, history=state.history,
                          base_losses=state.base_losses, base_tree=base_tree)
