"""Data models for diagnostics reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING

from .const import (
    DEFAULT_BETAS,
    DEFAULT_C_E,
    DEFAULT_FLAG_THRESHOLD,
    DEFAULT_TAIL_FRACTION,
)
from .grid import GradientScheme

if TYPE_CHECKING:
    from .closures import ClosureSpec, ClosureStats
    from .scales import FlowScales
    from .timestats import LongTimeAverage


class ResolutionClass(StrEnum):
    """Answer to "is an eddy viscosity model necessary?"."""

    EV_NOT_NEEDED = "ev_not_needed"
    EV_NEEDED = "ev_needed"
    INDETERMINATE = "indeterminate"


class DissipationClass(StrEnum):
    """Answer to "does the eddy viscosity model over-dissipate?"."""

    NOT_OVER_DISSIPATING = "not_over_dissipating"
    OVER_DISSIPATION_SUSPECTED = "over_dissipation_suspected"
    UNAVAILABLE = "unavailable"


@dataclass(frozen=True)
class AnalysisOptions:
    """Inputs that steer an analysis besides the snapshot data."""

    nu: float
    closure: ClosureSpec
    betas: tuple[float, ...] = DEFAULT_BETAS
    flag_threshold: float = DEFAULT_FLAG_THRESHOLD
    tail_fraction: float = DEFAULT_TAIL_FRACTION
    gradient_scheme: GradientScheme = GradientScheme.CENTRAL
    c_e: float = DEFAULT_C_E


@dataclass(frozen=True)
class DissipationSummary:
    """Long-time averages of the dissipation rates."""

    eps0: LongTimeAverage
    eps_turb: LongTimeAverage
    eps_total: LongTimeAverage


@dataclass(frozen=True)
class ResolutionVerdict:
    """Taylor microscale resolution test of an under-resolved, model-free run."""

    lambda_T: float
    h: float
    threshold_stmt: float
    threshold_proof: float
    lambda_criterion: float
    C_I: float
    C_E: float
    verdict: ResolutionClass
    under_dissipation_bound: float
    taylor_dissipation_estimate: float
    kolmogorov_microscale: float
    taylor_scale_estimate: float
    h_over_lambda_T: float


@dataclass(frozen=True)
class BoundEvaluation:
    """Dissipation bound at one value of beta."""

    beta: float
    lhs: float
    lhs_final: float
    rhs_thm2: float
    rhs_cor_a: float | None
    rhs_cor_b: float | None
    ratio_nu: float
    margin: float
    margin_final: float


@dataclass(frozen=True)
class WorkBound:
    """Averaged energy inequality with the forcing work bounded by F U."""

    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        """Return rhs - lhs."""
        return self.rhs - self.lhs


@dataclass(frozen=True)
class MonitoringStatistic:
    """One of the three monitored closure statistics."""

    name: str
    value: float | None
    flagged: bool


@dataclass(frozen=True)
class Verdicts:
    """Machine verdicts on the two questions."""

    resolution: ResolutionClass | None
    dissipation: DissipationClass
    causes: tuple[str, ...] = ()


@dataclass(frozen=True)
class DiagnosticsReport:
    """Every statistic, bound and verdict computed from one record."""

    provenance: str
    inputs: dict[str, object]
    scales: FlowScales
    closure_stats: ClosureStats | None
    monitoring: tuple[MonitoringStatistic, ...]
    dissipation: DissipationSummary | None
    energy_residual: float | None
    force_balance_residual: float | None
    work_bound: WorkBound | None
    taylor_microscale: float | None
    inverse_constant: float | None
    resolution: ResolutionVerdict | None
    bounds: tuple[BoundEvaluation, ...]
    verdicts: Verdicts
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def flags_raised(self) -> bool:
        """Return True when any monitored statistic exceeds the flag threshold."""
        return any(stat.flagged for stat in self.monitoring)
