"""Diagnostics for eddy viscosity turbulence models.

Answers two questions from a record of velocity snapshots: whether an eddy
viscosity model is needed at the mesh resolution, and whether the model in use
over-dissipates.
"""

from __future__ import annotations

from .closures import ClosureKind, ClosureSpec
from .coordinator import DiagnosticsCoordinator
from .exceptions import EVDiagError
from .grid import Field, Grid, Snapshot, SnapshotSeries
from .models import AnalysisOptions, DiagnosticsReport
from .solver import SolverConfig, run, taylor_green

__all__ = [
    "AnalysisOptions",
    "ClosureKind",
    "ClosureSpec",
    "DiagnosticsCoordinator",
    "DiagnosticsReport",
    "EVDiagError",
    "Field",
    "Grid",
    "Snapshot",
    "SnapshotSeries",
    "SolverConfig",
    "run",
    "taylor_green",
]
