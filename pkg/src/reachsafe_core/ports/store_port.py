"""
Persistence port interface.

Defines the contract for reading and writing the artifacts exchanged
between pipeline stages: workspaces, models, partitions, datasets and
per-epoch reports.
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, List, Tuple

from ..domain.models import Dataset, PartitionTree, RobotBody, ViolationReport, Workspace

if TYPE_CHECKING:
    from ..services.network import Mlp


class StorePort(ABC):
    """Abstract interface for artifact storage."""

    @abstractmethod
    def load_workspace(self, path: Path) -> Tuple[Workspace, RobotBody, dict]:
        """
        Load and validate a workspace file.

        Returns:
            (workspace, robot, extras) where extras holds optional keys such as the goal
        """
        pass

    @abstractmethod
    def save_workspace(self, path: Path, workspace: Workspace, robot: RobotBody, extras: dict) -> None:
        pass

    @abstractmethod
    def load_model(self, path: Path) -> "Mlp":
        pass

    @abstractmethod
    def save_model(self, path: Path, net: "Mlp") -> None:
        pass

    @abstractmethod
    def load_partition(self, path: Path) -> PartitionTree:
        pass

    @abstractmethod
    def save_partition(self, path: Path, tree: PartitionTree) -> None:
        pass

    @abstractmethod
    def load_dataset(self, path: Path) -> Dataset:
        pass

    @abstractmethod
    def save_dataset(self, path: Path, dataset: Dataset) -> None:
        pass

    @abstractmethod
    def write_reports(self, path: Path, reports: Iterable[ViolationReport]) -> None:
        """Write one JSON line per report, replacing the file."""
        pass

    @abstractmethod
    def read_reports(self, path: Path) -> List[dict]:
        pass
