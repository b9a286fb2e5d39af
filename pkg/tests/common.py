"""Analytic flows and record builders shared by the evdiag tests."""

from __future__ import annotations

from collections.abc import Callable, Sequence
import math

import numpy as np

from evdiag.grid import Field, Grid, Snapshot, SnapshotSeries
from evdiag.scales import FlowScales

TG_LAMBDA = math.sqrt(7.5)


def taylor_green(
    grid: Grid, time: float = 0.0, nu: float = 0.0, amplitude: float = 1.0
) -> Field:
    """Return the Taylor-Green vortex (sin x cos y, -cos x sin y) e^(-2 nu t)."""
    x, y = grid.coordinates()[:2]
    scale = amplitude * math.exp(-2.0 * nu * time)
    return Field.vector(
        grid,
        [scale * np.sin(x) * np.cos(y), -scale * np.cos(x) * np.sin(y)],
        time,
        "velocity",
    )


def kolmogorov_forcing(
    grid: Grid, amplitude: float = 1.0, wavenumber: int = 4, time: float = 0.0
) -> Field:
    """Return f = (amplitude sin(wavenumber y), 0)."""
    y = grid.coordinates()[1]
    return Field.vector(
        grid,
        [amplitude * np.sin(wavenumber * y), np.zeros(grid.shape)],
        time,
        "forcing",
    )


def kolmogorov_flow(
    grid: Grid,
    nu: float,
    amplitude: float = 1.0,
    wavenumber: int = 4,
    time: float = 0.0,
) -> Field:
    """Return the steady laminar response u = f / (nu k^2) to Kolmogorov forcing."""
    return kolmogorov_forcing(grid, amplitude, wavenumber, time).scaled(
        1.0 / (nu * wavenumber**2)
    )


def make_series(
    velocity: Callable[[float], Field],
    times: Sequence[float],
    forcing: Field | None = None,
    **extra: Callable[[float], Field],
) -> SnapshotSeries:
    """Build a series from a velocity function of time and optional extra fields."""
    snapshots = []
    for t in times:
        attached = {name: build(t) for name, build in extra.items()}
        snapshots.append(Snapshot(velocity(t), forcing=forcing, **attached))
    return SnapshotSeries(tuple(snapshots))


def random_solenoidal(
    grid: Grid, rng: np.random.Generator, modes: int = 3, time: float = 0.0
) -> Field:
    """Return (d psi/dy, -d psi/dx) for a random stream function of low modes."""
    x, y = grid.coordinates()[:2]
    u = np.zeros(grid.shape)
    v = np.zeros(grid.shape)
    for kx in range(modes + 1):
        for ky in range(modes + 1):
            if kx == ky == 0:
                continue
            a, b = rng.normal(size=2)
            phase = kx * x + ky * y
            # psi = a cos(phase) + b sin(phase)
            u += ky * (-a * np.sin(phase) + b * np.cos(phase))
            v -= kx * (-a * np.sin(phase) + b * np.cos(phase))
    return Field.vector(grid, [u, v], time, "forcing")


def make_scales(
    U: float = 1.0, L: float = 2.0, U_prime: float = 0.5, nu: float = 0.01
) -> FlowScales:
    """Return complete flow scales for statistics that only need the numbers."""
    return FlowScales(
        F=1.0,
        U=U,
        U_prime=U_prime,
        L=L,
        Re=L * U / nu,
        nu=nu,
        h=0.1,
        I=(U_prime / U) ** 2,
        U_final=U,
        U_prime_final=U_prime,
    )
