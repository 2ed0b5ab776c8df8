"""Shared fixtures: small workspaces, robots, and the bundled two-room setup."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from reachsafe_core.adapters.holonomic import HolonomicDynamics
from reachsafe_core.adapters.json_store import JsonStore
from reachsafe_core.resources import two_rooms_path
from reachsafe_core.services.geometry import build_robot, build_workspace


def square(x0, y0, x1, y1):
    """Counter-clockwise rectangle coordinates."""
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def empty_square():
    """10 m × 10 m workspace without obstacles."""
    return build_workspace(square(0, 0, 10, 10))


@pytest.fixture
def small_room():
    """3 m × 3 m workspace with one central obstacle."""
    return build_workspace(square(0, 0, 3, 3), [square(1.2, 1.2, 1.8, 1.8)])


@pytest.fixture
def unit_robot():
    """1 m × 1 m square robot centred on its reference point."""
    return build_robot(square(-0.5, -0.5, 0.5, 0.5))


@pytest.fixture
def small_robot():
    return build_robot(square(-0.15, -0.075, 0.15, 0.075))


@pytest.fixture
def l_robot():
    """Non-convex L-shaped footprint."""
    return build_robot([[-0.2, -0.2], [0.2, -0.2], [0.2, 0.0], [0.0, 0.0], [0.0, 0.2], [-0.2, 0.2]])


@pytest.fixture
def two_rooms():
    """(workspace, robot, extras) of the bundled two-room workspace."""
    return JsonStore().load_workspace(two_rooms_path())


@pytest.fixture
def dynamics():
    return HolonomicDynamics(K=0.01)


QUARTER = 0.5 * math.pi
