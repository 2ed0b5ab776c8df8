"""
JSON / CSV File Store Adapter.

Implements the store port with plain files:
- workspace: JSON {"outer", "holes", "robot", optional "goal" and "K"}
- model: JSON {"arch", "layers", "seed", "meta"}
- partition: JSON {"eps", "Q", "cells"}
- dataset: CSV (x,y,theta,ux,uy,utheta) plus a JSON sidecar
- reports: JSON lines, one per epoch

Floats are written with Python's shortest round-trip repr, so reading a
file back reproduces every value bit for bit.
"""

import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from ..domain.errors import WorkspaceValidationError
from ..domain.models import Dataset, PartitionTree, RobotBody, ViolationReport, Workspace
from ..ports.store_port import StorePort
from ..services.geometry import build_robot, build_workspace
from ..services.network import Mlp

DATASET_HEADER = ["x", "y", "theta", "ux", "uy", "utheta"]


def _read_json(path: Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=1, allow_nan=False)
        f.write("\n")


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


class JsonStore(StorePort):
    """File-based artifact storage."""

    # === Workspace ===

    def parse_workspace(self, data: Dict[str, Any]) -> Tuple[Workspace, RobotBody, dict]:
        """Validate a workspace document; errors name the offending field."""
        if not isinstance(data, dict):
            raise WorkspaceValidationError("workspace file must hold a JSON object")
        for key in ("outer", "robot"):
            if key not in data:
                raise WorkspaceValidationError("missing required key", key)
        holes = data.get("holes", [])
        if not isinstance(holes, list):
            raise WorkspaceValidationError("must be a list of polygons", "holes")
        workspace = build_workspace(data["outer"], holes)
        robot = build_robot(data["robot"])
        extras = {k: v for k, v in data.items() if k not in ("outer", "holes", "robot")}
        if "goal" in extras:
            goal = extras["goal"]
            if not isinstance(goal, list) or len(goal) != 3:
                raise WorkspaceValidationError("must be [x, y, theta]", "goal")
        return workspace, robot, extras

    def load_workspace(self, path: Path) -> Tuple[Workspace, RobotBody, dict]:
        try:
            data = _read_json(Path(path))
        except json.JSONDecodeError as e:
            raise WorkspaceValidationError(f"invalid JSON ({e})")
        return self.parse_workspace(data)

    def save_workspace(self, path: Path, workspace: Workspace, robot: RobotBody, extras: dict) -> None:
        data = workspace.to_dict()
        data["robot"] = robot.to_coords()
        data.update(extras)
        _write_json(Path(path), data)

    # === Model ===

    def load_model(self, path: Path) -> Mlp:
        return Mlp.from_dict(_read_json(Path(path)))

    def save_model(self, path: Path, net: Mlp) -> None:
        _write_json(Path(path), net.to_dict())

    # === Partition ===

    def load_partition(self, path: Path) -> PartitionTree:
        return PartitionTree.from_dict(_read_json(Path(path)))

    def save_partition(self, path: Path, tree: PartitionTree) -> None:
        _write_json(Path(path), tree.to_dict())

    # === Dataset ===

    def load_dataset(self, path: Path) -> Dataset:
        path = Path(path)
        rows: List[List[float]] = []
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != DATASET_HEADER:
                raise ValueError(f"Dataset header must be {','.join(DATASET_HEADER)}, got {header}")
            for row in reader:
                if row:
                    rows.append([float(v) for v in row])
        meta = _read_json(sidecar_path(path)) if sidecar_path(path).exists() else {}
        arr = np.asarray(rows, dtype=float).reshape(-1, 6)
        goal = np.asarray(meta.get("goal", [0.0, 0.0, 0.0]), dtype=float)
        return Dataset(states=arr[:, :3], controls=arr[:, 3:], goal=goal, metadata=meta)

    def save_dataset(self, path: Path, dataset: Dataset) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(DATASET_HEADER)
            for z, u in zip(dataset.states, dataset.controls):
                writer.writerow([repr(float(v)) for v in (*z, *u)])
        _write_json(sidecar_path(path), dataset.metadata)

    # === Reports ===

    def write_reports(self, path: Path, reports: Iterable[ViolationReport]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for rep in reports:
                f.write(json.dumps(rep.to_dict()) + "\n")

    def append_report(self, path: Path, report: ViolationReport) -> None:
        with open(path, "a", encoding="utf-8") as f:
            f.write(json.dumps(report.to_dict()) + "\n")

    def read_reports(self, path: Path) -> List[dict]:
        with open(path, "r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]

    # === Run records ===

    def write_json(self, path: Path, data: Any) -> None:
        _write_json(Path(path), data)

    def write_text(self, path: Path, text: str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")

    def write_manifest(self, out_dir: Path, inputs: Sequence[Path], seed: int, version: str,
                       config: Dict[str, Any], outputs: Sequence[Path] = ()) -> Path:
        """Record input hashes, seed, version and effective config next to the outputs."""
        manifest = {
            "version": version,
            "seed": seed,
            "inputs": {str(p): sha256_file(Path(p)) for p in inputs},
            "outputs": {str(p): sha256_file(Path(p)) for p in outputs if Path(p).exists()},
            "config": config,
        }
        path = Path(out_dir) / "manifest.json"
        _write_json(path, manifest)
        return path
