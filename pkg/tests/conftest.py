from __future__ import annotations

import sys
from pathlib import Path

import pytest

from crnstab.kinetics import RateAssignment
from crnstab.network import load_network, parse_network

sys.path.insert(0, str(Path(__file__).parent))

from support import CB_RATES, NETWORKS  # noqa: E402


@pytest.fixture(scope="session")
def triangle():
    """Deficiency-one network 3X -> X+Y+Z -> 3Z -> {3X, 3Y}, 3Y -> 3X."""
    return load_network(NETWORKS / "triangle.crn")


@pytest.fixture(scope="session")
def triangle_cb(triangle):
    return triangle, RateAssignment.of(triangle, CB_RATES)


@pytest.fixture(scope="session")
def cubic():
    return load_network(NETWORKS / "cubic.crn")


@pytest.fixture(scope="session")
def square():
    return load_network(NETWORKS / "square.crn")


@pytest.fixture(scope="session")
def square_de():
    return load_network(NETWORKS / "square_de.crn")


@pytest.fixture(scope="session")
def isomer():
    return parse_network("X <-> Y")
