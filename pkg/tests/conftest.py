"""Shared fixtures: preset grids and cached (session-scoped) flow runs.

The long acceptance runs are executed once per session and reused by
every test that needs them.
"""

import numpy as np
import pytest

from hmcflow import FlowParams, ProfileGrid, evolve
from hmcflow.cli import make_preset


def sphere_grid(n, r0=1.0):
    x = np.linspace(-r0, r0, n)
    f = np.sqrt(np.maximum(r0 * r0 - x * x, 0.0))
    f[0] = f[-1] = 0.0
    return ProfileGrid(x=x, f=f, t=0.0, center=0.0)


@pytest.fixture(scope="session")
def sphere400():
    return sphere_grid(400)


@pytest.fixture(scope="session")
def bumpy400():
    return make_preset("bumpy", 400)


@pytest.fixture(scope="session")
def sphere_run_coarse():
    # quick full run used by several engine/diagnostics tests
    return evolve(sphere_grid(151), FlowParams(area_floor_frac=1e-3),
                  record_every=200)


@pytest.fixture(scope="session")
def bumpy_run_coarse():
    return evolve(make_preset("bumpy", 151), FlowParams(area_floor_frac=1e-3),
                  record_every=200)


# ----------------------------------------------------------------------
# acceptance-scale cached runs
# ----------------------------------------------------------------------

@pytest.fixture(scope="session")
def run_sphere400():
    return evolve(make_preset("sphere", 400), FlowParams(), record_every=500)


@pytest.fixture(scope="session")
def run_sphere400_eps():
    return evolve(make_preset("sphere", 400), FlowParams(epsilon=0.1),
                  record_every=500)


@pytest.fixture(scope="session")
def bumpy_family():
    """Bumpy runs for the monotone/bounds/consistency criteria."""
    out = {}
    for eps in (0.0, 0.0125, 0.025, 0.05, 0.1):
        out[eps] = evolve(make_preset("bumpy", 400), FlowParams(epsilon=eps),
                          record_every=500)
    return out


@pytest.fixture(scope="session")
def bumpy_snapshots(bumpy_family):
    """Snapshot runs at ten common times for the eps -> 0 comparison."""
    t_min = min(bumpy_family[e].final_time for e in (0.1, 0.05, 0.025, 0.0125))
    times = tuple(np.linspace(0.08, 0.9, 10) * t_min)
    out = {}
    for eps in (0.1, 0.05, 0.025, 0.0125):
        out[eps] = evolve(make_preset("bumpy", 400), FlowParams(epsilon=eps),
                          record_every=10 ** 6, snapshot_times=times)
    return out


@pytest.fixture(scope="session")
def run_sphere800():
    return evolve(make_preset("sphere", 800), FlowParams(area_floor_frac=1e-3),
                  record_every=1000)


@pytest.fixture(scope="session")
def run_bumpy800():
    return evolve(make_preset("bumpy", 800), FlowParams(area_floor_frac=1e-3),
                  record_every=1000)
