"""Bundled example inputs."""

from pathlib import Path

RESOURCE_DIR = Path(__file__).resolve().parent


def two_rooms_path() -> Path:
    """Two rooms joined by a 0.5 m corridor, with a 0.30 × 0.15 m robot."""
    return RESOURCE_DIR / "two_rooms.json"
