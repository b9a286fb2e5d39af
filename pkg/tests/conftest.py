"""Common fixtures for the evdiag tests."""

from __future__ import annotations

import math

import numpy as np
import pytest

from evdiag.closures import ClosureKind, ClosureSpec
from evdiag.grid import Field, GradientScheme, Grid, SnapshotSeries
from evdiag.models import AnalysisOptions
from evdiag.solver import taylor_green as solve_taylor_green

from tests.common import (
    kolmogorov_flow,
    kolmogorov_forcing,
    make_series,
    taylor_green,
)

KOLMOGOROV_NU = 0.05


def pytest_addoption(parser: pytest.Parser) -> None:
    """Add the --runslow switch."""
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow tests"
    )


def pytest_collection_modifyitems(
    config: pytest.Config, items: list[pytest.Item]
) -> None:
    """Skip slow tests unless --runslow is given."""
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def grid() -> Grid:
    """Return a 32x32 periodic box."""
    return Grid.periodic_box(32)


@pytest.fixture
def taylor_green_series(grid: Grid) -> SnapshotSeries:
    """Return the analytic decaying Taylor-Green vortex without forcing."""
    return make_series(
        lambda t: taylor_green(grid, t, 0.01), np.linspace(0.0, 1.0, 11)
    )


@pytest.fixture
def kolmogorov_series(grid: Grid) -> SnapshotSeries:
    """Return a laminar Kolmogorov flow with an oscillating Taylor-Green disturbance."""
    base = kolmogorov_flow(grid, KOLMOGOROV_NU)

    def velocity(t: float) -> Field:
        disturbance = taylor_green(grid, t, amplitude=0.2 * math.cos(t))
        return Field(grid, base.values + disturbance.values, 1, t, "velocity")

    return make_series(
        velocity, np.linspace(0.0, 2.0, 21), forcing=kolmogorov_forcing(grid)
    )


@pytest.fixture
def smagorinsky_options() -> AnalysisOptions:
    """Return spectral analysis options with the Smagorinsky closure."""
    return AnalysisOptions(
        nu=KOLMOGOROV_NU,
        closure=ClosureSpec(ClosureKind.SMAGORINSKY, cs=0.17),
        gradient_scheme=GradientScheme.SPECTRAL,
    )


@pytest.fixture(scope="session")
def solver_taylor_green() -> SnapshotSeries:
    """Return the solver run of the Taylor-Green vortex, 64x64, nu = 0.01, T = 5."""
    return solve_taylor_green(64, 0.01, 5.0)
