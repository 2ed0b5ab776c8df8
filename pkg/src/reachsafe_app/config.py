"""
Run configuration for the command line.

Values come from built-in defaults, then an optional named preset
(`--preset`), then an optional JSON file (`--config`), then explicit flags,
each layer overriding the previous one.
The effective configuration is echoed into every run manifest.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from reachsafe_core.domain.intervals import Box
from reachsafe_core.resources import two_rooms_path
from reachsafe_core.services.demonstrations import DataConfig
from reachsafe_core.services.partitioner import PartitionConfig
from reachsafe_core.services.planner import PlannerConfig
from reachsafe_core.services.reachability import RefineConfig
from reachsafe_core.services.trainer import LossConfig, OptimizerConfig, PipelineConfig, ScheduleConfig


# Two-room experiments: controller shape, subdivision thresholds, and
# the λ_S ramp (step per epoch, final value).
PRESETS: Dict[str, Dict[str, Any]] = {
    "phi1": {
        "arch": [3, 50, 50, 50, 3],
        "partition": {"eps_w": [0.1, 0.1, 0.2 * math.pi]},
        "schedule": {"step": 1e-4, "target": 5e-3},
    },
    "phi2": {
        "arch": [3, 50, 50, 50, 3],
        "partition": {"eps_w": [0.25, 0.25, 0.2 * math.pi]},
        "schedule": {"step": 2e-4, "target": 1e-2},
    },
    "phi3": {
        "arch": [3, 50, 50, 3],
        "partition": {"eps_w": [0.1, 0.1, 0.2 * math.pi]},
        "schedule": {"step": 4e-5, "target": 2e-3},
    },
}


def merge_layers(base: Dict[str, Any], over: Dict[str, Any]) -> Dict[str, Any]:
    """Overlay one config layer on another; sections merge key by key."""
    out = dict(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = {**out[key], **value}
        else:
            out[key] = value
    return out


@dataclass
class SimulateConfig:
    """Closed-loop evaluation settings."""
    n_starts: int = 50
    n_steps: int = 2000
    goal_tolerance: float = 0.1

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SimulateConfig":
        return cls(**{k: data[k] for k in cls().__dict__ if k in data})


@dataclass
class RunConfig:
    """Every parameter of a CLI run."""
    workspace: str = field(default_factory=lambda: str(two_rooms_path()))
    out_dir: str = "out"
    dataset: Optional[str] = None
    model: Optional[str] = None
    partition_file: Optional[str] = None
    seed: int = 0
    threads: int = 1
    arch: List[int] = field(default_factory=lambda: [3, 50, 50, 50, 3])
    K: float = 0.01
    q_box: Box = Box.empty_dims()
    n_epochs: int = 50
    record_wall_time: bool = False
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    data: DataConfig = field(default_factory=DataConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            loss=self.loss,
            optimizer=self.optimizer,
            schedule=self.schedule,
            eps_w=self.partition.eps_w,
            eps_p=self.refine.eps_p,
            eps_q=self.refine.eps_q,
            n_epochs=self.n_epochs,
            theta_sectors=self.partition.theta_sectors,
            unsafe_search_depth=self.partition.unsafe_search_depth,
            threads=self.threads,
            record_wall_time=self.record_wall_time,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "workspace": self.workspace,
            "out_dir": self.out_dir,
            "dataset": self.dataset,
            "model": self.model,
            "partition_file": self.partition_file,
            "seed": self.seed,
            "threads": self.threads,
            "arch": list(self.arch),
            "K": self.K,
            "q_box": self.q_box.to_dict(),
            "n_epochs": self.n_epochs,
            "record_wall_time": self.record_wall_time,
            "partition": self.partition.to_dict(),
            "refine": self.refine.to_dict(),
            "loss": self.loss.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "schedule": self.schedule.to_dict(),
            "planner": self.planner.to_dict(),
            "data": self.data.to_dict(),
            "simulate": self.simulate.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        cfg = cls()
        scalars = ("workspace", "out_dir", "dataset", "model", "partition_file", "seed", "threads",
                   "K", "n_epochs", "record_wall_time")
        for key in scalars:
            if key in data:
                setattr(cfg, key, data[key])
        if "arch" in data:
            cfg.arch = [int(a) for a in data["arch"]]
        if "q_box" in data:
            cfg.q_box = Box.from_dict(data["q_box"])
        sections = {
            "partition": PartitionConfig,
            "refine": RefineConfig,
            "loss": LossConfig,
            "optimizer": OptimizerConfig,
            "schedule": ScheduleConfig,
            "planner": PlannerConfig,
            "data": DataConfig,
            "simulate": SimulateConfig,
        }
        for key, section_cls in sections.items():
            if key in data:
                merged = {**getattr(cfg, key).to_dict(), **data[key]}
                setattr(cfg, key, section_cls.from_dict(merged))
        return cfg

    @classmethod
    def load(cls, path: Optional[str], preset: Optional[str] = None) -> "RunConfig":
        """Preset (if any) overlaid by the JSON file at `path` (if any)."""
        data: Dict[str, Any] = {}
        if preset is not None:
            if preset not in PRESETS:
                raise ValueError(f"Unknown preset {preset!r}; choose from {sorted(PRESETS)}")
            data = PRESETS[preset]
        if path is not None:
            with open(Path(path), "r", encoding="utf-8") as f:
                layer = json.load(f)
            if not isinstance(layer, dict):
                raise ValueError(f"Config file {path} must hold a JSON object")
            data = merge_layers(data, layer)
        return cls.from_dict(data)
