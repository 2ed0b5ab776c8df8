"""
Command line surface.

Subcommands:
    validate     Check a workspace file
    gen-data     Plan RRT* demonstrations and write the dataset
    train-base   Fit a controller to the dataset
    partition    Build the safe-set partition
    refine       Refine a partition against a controller
    retrain      Full pipeline: fit, partition, refine and retrain per epoch
    verify       Violation report for a controller over a partition
    simulate     Closed-loop rollouts from Safe cells
    export-svg   Draw workspace, leaves, reach boxes and rollouts

Exit codes: 0 success, 2 validation error, 3 unreachable goal or empty
partition, 1 anything else. Failures print one JSON object to stderr.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from reachsafe_core import __version__
from reachsafe_core.adapters.holonomic import HolonomicDynamics
from reachsafe_core.adapters.json_store import JsonStore
from reachsafe_core.domain.errors import EmptyPartition, Unreachable
from reachsafe_core.services.demonstrations import build_dataset, generate_trajectories, rollout
from reachsafe_core.services.geometry import sample_configurations
from reachsafe_core.services.partitioner import PartitionBuilder
from reachsafe_core.services.planner import RrtStarPlanner
from reachsafe_core.services.reachability import ReachabilityService
from reachsafe_core.services.svg_export import render_svg
from reachsafe_core.services.trainer import TrainState, Adam, run_pipeline, train_base

from .config import PRESETS, RunConfig

logger = logging.getLogger("reachsafe")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_UNREACHABLE = 3


class Run:
    """One CLI invocation: effective config, store, and loaded inputs."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.store = JsonStore()
        self.out_dir = Path(cfg.out_dir)
        self.inputs: List[Path] = []
        self.outputs: List[Path] = []
        self.workspace, self.robot, self.extras = self.store.load_workspace(Path(cfg.workspace))
        self.inputs.append(Path(cfg.workspace))
        self.dynamics = HolonomicDynamics(float(self.extras.get("K", cfg.K)))
        self.goal = np.asarray(self.extras.get("goal", cfg.data.goal), dtype=float)

    def require(self, attr: str, flag: str) -> Path:
        value = getattr(self.cfg, attr)
        if not value:
            raise ValueError(f"{flag} is required for this command")
        path = Path(value)
        self.inputs.append(path)
        return path

    def output(self, name: str) -> Path:
        path = self.out_dir / name
        self.outputs.append(path)
        return path

    def reach_service(self) -> ReachabilityService:
        return ReachabilityService(self.workspace, self.robot, self.dynamics, self.cfg.threads)

    def finish(self) -> None:
        self.store.write_manifest(self.out_dir, self.inputs, self.cfg.seed, __version__,
                                  self.cfg.to_dict(), self.outputs)


# === Subcommands ===

def cmd_validate(run: Run) -> dict:
    return {
        "valid": True,
        "holes": len(run.workspace.holes),
        "free_area": run.workspace.free.area,
        "robot_radius": run.robot.r,
        "robot_pieces": len(run.robot.convex_pieces),
    }


def cmd_gen_data(run: Run) -> dict:
    cfg = run.cfg
    planner = RrtStarPlanner(run.workspace, run.robot, cfg.planner)
    trajs = generate_trajectories(planner, run.goal, cfg.data.n_trajectories, cfg.seed,
                                  cfg.threads, cfg.data.max_attempts)
    if not trajs:
        raise Unreachable("No trajectory reached the goal")
    dataset = build_dataset(trajs, run.workspace, run.robot, run.goal, cfg.data, cfg.seed)
    path = run.output("dataset.csv")
    run.store.save_dataset(path, dataset)
    run.outputs.append(path.with_suffix(".json"))
    return dataset.metadata


def cmd_train_base(run: Run) -> dict:
    cfg = run.cfg
    dataset = run.store.load_dataset(run.require("dataset", "--dataset"))
    state = train_base(dataset, cfg.arch, cfg.loss, cfg.optimizer)
    state.net.meta.update({"base_loss": state.base_losses[-1], "optimizer_steps": cfg.optimizer.epochs})
    run.store.save_model(run.output("model.json"), state.net)
    return {"J": state.base_losses[-1], "steps": cfg.optimizer.epochs, "params": state.net.param_count}


def cmd_partition(run: Run) -> dict:
    cfg = run.cfg
    builder = PartitionBuilder(run.workspace, run.robot, cfg.threads, cfg.partition.unsafe_search_depth)
    tree = builder.build_partition(cfg.q_box, cfg.partition.eps_w, cfg.partition.theta_sectors)
    if not tree.leaves:
        raise EmptyPartition("The partition has no leaves")
    run.store.save_partition(run.output("partition.json"), tree)
    return {"leaf_count": len(tree.leaves), **tree.diagnostics}


def cmd_refine(run: Run) -> dict:
    cfg = run.cfg
    tree = run.store.load_partition(run.require("partition_file", "--partition"))
    net = run.store.load_model(run.require("model", "--model"))
    result = run.reach_service().refine_partition(tree, net, cfg.refine.eps_p, cfg.refine.eps_q)
    run.store.save_partition(run.output("partition_refined.json"), result.tree)
    summary = result.to_dict()
    run.store.write_json(run.output("refine.json"), summary)
    summary.pop("dropped")
    return summary


def cmd_retrain(run: Run) -> dict:
    cfg = run.cfg
    dataset = run.store.load_dataset(run.require("dataset", "--dataset"))
    state = None
    if cfg.model:
        net = run.store.load_model(run.require("model", "--model"))
        state = TrainState(net=net, optimizer=Adam(net, cfg.optimizer))
    result = run_pipeline(run.workspace, run.robot, dataset, cfg.arch, run.dynamics,
                          cfg.pipeline_config(), cfg.q_box, state)
    run.store.write_reports(run.output("report.jsonl"), result.history)
    run.store.save_model(run.output("model_retrained.json"), result.net)
    run.store.save_partition(run.output("partition_refined.json"), result.tree)
    first, last = result.history[0], result.history[-1]
    return {
        "epochs": cfg.n_epochs,
        "violation_volume": [first.violation_volume, last.violation_volume],
        "active_cells": [first.active_cells, last.active_cells],
        "J": [first.J, last.J],
    }


def cmd_verify(run: Run) -> dict:
    tree = run.store.load_partition(run.require("partition_file", "--partition"))
    net = run.store.load_model(run.require("model", "--model"))
    rep = run.reach_service().violation_report(tree, net, run.cfg.loss.delta, eps_smooth=run.cfg.loss.eps_smooth)
    run.store.write_reports(run.output("verify.jsonl"), [rep])
    return rep.to_dict()


def _rollouts(run: Run, net, tree) -> list:
    cfg = run.cfg
    safe = tree.safe_leaves()
    if not safe:
        raise EmptyPartition("The partition has no Safe cells to start from")
    rng = np.random.default_rng(cfg.seed)
    picks = rng.choice(len(safe), size=cfg.simulate.n_starts, replace=len(safe) < cfg.simulate.n_starts)
    results = []
    for index in picks:
        start = sample_configurations(safe[int(index)].box.cfg, 1, rng)[0]
        results.append(rollout(net, run.dynamics, start, cfg.simulate.n_steps, run.workspace, run.robot,
                               run.goal, cfg.simulate.goal_tolerance))
    return results


def cmd_simulate(run: Run) -> dict:
    tree = run.store.load_partition(run.require("partition_file", "--partition"))
    net = run.store.load_model(run.require("model", "--model"))
    results = _rollouts(run, net, tree)
    summary = {
        "runs": len(results),
        "collisions": sum(1 for r in results if r.collision_step is not None),
        "reached_fraction": sum(1 for r in results if r.reached) / max(1, len(results)),
        "outcomes": [r.to_dict() for r in results],
    }
    run.store.write_json(run.output("simulate.json"), summary)
    summary.pop("outcomes")
    return summary


def cmd_export_svg(run: Run) -> dict:
    tree = run.store.load_partition(run.require("partition_file", "--partition"))
    reach_boxes, rollouts = [], []
    if run.cfg.model:
        net = run.store.load_model(run.require("model", "--model"))
        service = run.reach_service()
        service.violation_report(tree, net, run.cfg.loss.delta)
        active = [c for c in tree.iter_leaves() if c.active]
        reach_boxes = service.reach_cells(net, active, tree.q_box)
        rollouts = _rollouts(run, net, tree)
    path = run.output("figure.svg")
    run.store.write_text(path, render_svg(run.workspace, tree, reach_boxes, rollouts))
    return {"svg": str(path), "leaves": len(tree.leaves), "reach_boxes": len(reach_boxes)}


COMMANDS: Dict[str, Callable[[Run], dict]] = {
    "validate": cmd_validate,
    "gen-data": cmd_gen_data,
    "train-base": cmd_train_base,
    "partition": cmd_partition,
    "refine": cmd_refine,
    "retrain": cmd_retrain,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "export-svg": cmd_export_svg,
}


# === Argument handling ===

HELP = {
    "validate": "Check a workspace file",
    "gen-data": "Plan RRT* demonstrations and write the dataset",
    "train-base": "Fit a controller to the dataset",
    "partition": "Build the safe-set partition",
    "refine": "Refine a partition against a controller",
    "retrain": "Fit, partition, then refine and retrain per epoch",
    "verify": "Violation report for a controller over a partition",
    "simulate": "Closed-loop rollouts from Safe cells",
    "export-svg": "Draw workspace, leaves, reach boxes and rollouts",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reachsafe", description="Safety-aware controller training")
    parser.add_argument("--version", action="version", version=f"reachsafe {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--preset", choices=sorted(PRESETS), help="Named two-room experiment settings")
    common.add_argument("--workspace", help="Workspace JSON (default: bundled two-room workspace)")
    common.add_argument("--out", dest="out_dir", help="Output directory")
    common.add_argument("--dataset", help="Dataset CSV")
    common.add_argument("--model", help="Model JSON")
    common.add_argument("--partition", dest="partition_file", help="Partition JSON")
    common.add_argument("--threads", type=int, help="Worker threads")
    common.add_argument("--seed", type=int, help="Master seed")
    common.add_argument("--mode", choices=["paper", "saturating"], help="Dataset shaping mode")
    common.add_argument("--epochs", dest="n_epochs", type=int, help="Retraining epochs")
    common.add_argument("--arch", type=lambda s: [int(v) for v in s.split("x")], help="Layer sizes, e.g. 3x16x16x3")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < --preset < --config file < explicit flags."""
    cfg = RunConfig.load(args.config, args.preset)
    for key in ("workspace", "out_dir", "dataset", "model", "partition_file", "threads", "seed", "n_epochs", "arch"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if args.mode is not None:
        cfg.data.mode = type(cfg.data.mode)(args.mode)
    # The master seed drives network initialisation and planning.
    cfg.optimizer.seed = cfg.seed
    cfg.planner.seed = cfg.seed
    cfg.partition.threads = cfg.threads
    cfg.planner.resolution = 0.25 * min(cfg.partition.eps_w[0], cfg.partition.eps_w[1])
    return cfg


def configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="[%(name)s] %(levelname)s %(message)s", stream=sys.stderr, force=True)


def _error_exit(code: int, exc: BaseException) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "field": getattr(exc, "field", None)}
    print(json.dumps(payload), file=sys.stderr)
    return code


def dispatch(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_VALIDATION
    configure_logging(args.verbose, args.quiet)

    try:
        cfg = resolve_config(args)
        run = Run(cfg)
        summary = COMMANDS[args.command](run)
        if args.command != "validate":
            run.finish()
    except (Unreachable, EmptyPartition) as e:
        return _error_exit(EXIT_UNREACHABLE, e)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as e:
        return _error_exit(EXIT_VALIDATION, e)
    except Exception as e:
        logger.exception("Internal error")
        return _error_exit(EXIT_INTERNAL, e)

    print(json.dumps(summary, indent=1, default=float))
    return EXIT_OK
