import math

import pytest

from .equilibrium.equilibrium import solve_equilibrium
from .model.constants import TWO_PI
from .model.lattice import build_lattice
from .model.species import BERYLLIUM_9
from .modes.modes import compute_modes

# Operating point: 9Be+ at 2.5 T with 2.1 MHz axial confinement
OMEGA_Z = TWO_PI * 2.1e6
B_FIELD = 2.5


def pytest_collection_modifyitems(items):
    for item in items:
        if "performance" in item.nodeid.lower():
            item.add_marker(pytest.mark.performance)


@pytest.fixture(scope="session")
def beryllium():
    return BERYLLIUM_9


@pytest.fixture(scope="session")
def single_ion(beryllium):
    return build_lattice("square", 30e-6, 1, 0.0, beryllium, OMEGA_Z, B_FIELD)


@pytest.fixture(scope="session")
def ion_pair(beryllium):
    """Two sites 30 um apart in the lattice plane, field along the plane normal"""
    return build_lattice("square", 30e-6, 2, 0.0, beryllium, OMEGA_Z, B_FIELD)


@pytest.fixture(scope="session")
def honeycomb6(beryllium):
    """Six-site honeycomb ring, 15 um spacing, trap axis and field tilted by 20 degrees"""
    return build_lattice("honeycomb", 15e-6, 6, math.radians(20), beryllium, OMEGA_Z, B_FIELD)


@pytest.fixture(scope="session")
def single_ion_modes(single_ion):
    eq = solve_equilibrium(single_ion)
    mats, modeset = compute_modes(single_ion, eq.positions)
    return eq, mats, modeset


@pytest.fixture(scope="session")
def ion_pair_modes(ion_pair):
    eq = solve_equilibrium(ion_pair)
    mats, modeset = compute_modes(ion_pair, eq.positions)
    return eq, mats, modeset


@pytest.fixture(scope="session")
def honeycomb6_modes(honeycomb6):
    eq = solve_equilibrium(honeycomb6)
    mats, modeset = compute_modes(honeycomb6, eq.positions)
    return eq, mats, modeset
