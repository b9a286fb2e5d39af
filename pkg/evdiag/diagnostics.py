"""Dissipation statistics, energy budgets, resolution verdicts and dissipation bounds.

Two questions are answered from a velocity record:

* Is an eddy viscosity model necessary? A model-free run whose Taylor
  microscale is resolved by the mesh is not under-dissipated in the aggregate
  (``resolution_verdict``).
* Does the model over-dissipate? The time-averaged dissipation is bounded by
  ``U^3/L`` times a factor controlled by ``avg(nu_turb)/(L U)``, which is in
  turn bounded by ``mu avg(l)/L sqrt(I_model)`` (``evaluate_bounds`` and
  ``assemble_report``).
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
import logging
import math

import numpy as np

from .closures import (
    NO_MODEL,
    ClosureSpec,
    ClosureStats,
    closure_stats,
    resolve_closure,
)
from .const import DEFAULT_FLAG_THRESHOLD, DEFAULT_TAIL_FRACTION, ENERGY_RESIDUAL_TOL
from .exceptions import RangeError, UndefinedScaleError, ValidationError
from .grid import (
    Field,
    GradientScheme,
    Snapshot,
    SnapshotSeries,
    gradient,
    inner_product,
    l2_norm_sq,
    sym_gradient,
)
from .models import (
    BoundEvaluation,
    DiagnosticsReport,
    DissipationClass,
    DissipationSummary,
    MonitoringStatistic,
    ResolutionClass,
    ResolutionVerdict,
    Verdicts,
    WorkBound,
)
from .scales import FlowScales, compute_F, compute_L, flow_scales, kinetic_energy_series
from .timestats import TimeSeries, avg_inf, avg_T, cs_holds, cs_in_time, cs_in_time_inf

_LOGGER = logging.getLogger(__name__)

INTENSITY_BOUND_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class DissipationSeries:
    """Viscous, model and total dissipation rates per snapshot."""

    eps0: TimeSeries
    eps_turb: TimeSeries
    eps_total: TimeSeries

    def summary(
        self, tail_fraction: float = DEFAULT_TAIL_FRACTION
    ) -> DissipationSummary:
        """Return the long-time averages of the three rates."""
        return DissipationSummary(
            eps0=avg_inf(self.eps0, tail_fraction),
            eps_turb=avg_inf(self.eps_turb, tail_fraction),
            eps_total=avg_inf(self.eps_total, tail_fraction),
        )


@dataclass(frozen=True)
class EnergyBudget:
    """Terms of the integrated energy equality over the record."""

    kinetic_start: float
    kinetic_end: float
    dissipated: float
    work: float

    @property
    def residual(self) -> float:
        """Return (E(T) + dissipated - E(0) - work) / (E(0) + |work|)."""
        excess = self.kinetic_end + self.dissipated - self.kinetic_start - self.work
        scale = self.kinetic_start + abs(self.work)
        if scale == 0.0:
            return 0.0 if excess == 0.0 else math.copysign(math.inf, excess)
        return excess / scale


@dataclass(frozen=True)
class InvariantCheck:
    """Outcome of one invariant of the verify suite."""

    name: str
    passed: bool
    detail: str


def _require_viscosity(nu: float) -> None:
    if not nu > 0:
        raise ValidationError(f"viscosity must be positive, got {nu}")


def _require_forcing(series: SnapshotSeries, f: Field | None) -> Field:
    forcing = f if f is not None else series.forcing
    if forcing is None:
        raise ValidationError("the energy budget needs the body force f")
    if forcing.grid != series.grid or forcing.rank != 1:
        raise ValidationError("forcing must be a vector field on the series grid")
    return forcing


def dissipation_density(
    snapshot: Snapshot,
    nu: float,
    closure: ClosureSpec = NO_MODEL,
    scheme: GradientScheme = GradientScheme.CENTRAL,
) -> tuple[Field, Field]:
    """Return the per-cell fields 2 nu |grad_s u|^2 and nu_turb |grad_s u|^2."""
    strain_sq = sym_gradient(snapshot.velocity, scheme).magnitude_sq()
    nu_turb = resolve_closure(closure, snapshot, scheme).nu_turb.values
    grid = snapshot.grid
    return (
        Field(grid, 2.0 * nu * strain_sq, 0, snapshot.time, "viscous dissipation"),
        Field(grid, nu_turb * strain_sq, 0, snapshot.time, "model dissipation"),
    )


def dissipation_series(
    series: SnapshotSeries,
    nu: float,
    closure: ClosureSpec = NO_MODEL,
    scheme: GradientScheme = GradientScheme.CENTRAL,
) -> DissipationSeries:
    """Return eps_0 = (2 nu/|Omega|) ||grad_s u||^2 and eps_turb per snapshot."""
    _require_viscosity(nu)
    volume = series.grid.volume
    cell = series.grid.cell_volume
    eps0, eps_turb = [], []
    for snapshot in series:
        strain = sym_gradient(snapshot.velocity, scheme)
        nu_turb = resolve_closure(closure, snapshot, scheme).nu_turb.values
        eps0.append(2.0 * nu * l2_norm_sq(strain) / volume)
        eps_turb.append(float(np.sum(nu_turb * strain.magnitude_sq())) * cell / volume)
    times = series.times
    eps0_arr, eps_turb_arr = np.array(eps0), np.array(eps_turb)
    return DissipationSeries(
        eps0=TimeSeries(times, eps0_arr, "eps0"),
        eps_turb=TimeSeries(times, eps_turb_arr, "eps_turb"),
        eps_total=TimeSeries(times, eps0_arr + eps_turb_arr, "eps_total"),
    )


def energy_budget(
    series: SnapshotSeries,
    nu: float,
    closure: ClosureSpec = NO_MODEL,
    f: Field | None = None,
    scheme: GradientScheme = GradientScheme.CENTRAL,
) -> EnergyBudget:
    """Return the integrated energy equality terms with trapezoidal time quadrature."""
    forcing = _require_forcing(series, f)
    rates = dissipation_series(series, nu, closure, scheme)
    volume = series.grid.volume
    times = series.times
    work = np.array([inner_product(forcing, s.velocity) for s in series])
    return EnergyBudget(
        kinetic_start=0.5 * l2_norm_sq(series[0].velocity),
        kinetic_end=0.5 * l2_norm_sq(series[-1].velocity),
        dissipated=float(np.trapezoid(rates.eps_total.values * volume, times)),
        work=float(np.trapezoid(work, times)),
    )


def energy_residual(
    series: SnapshotSeries,
    nu: float,
    closure: ClosureSpec = NO_MODEL,
    f: Field | None = None,
    scheme: GradientScheme = GradientScheme.CENTRAL,
) -> float:
    """Return the normalized residual of the energy equality.

    The energy inequality holds when the residual is at most the tolerance.
    """
    return energy_budget(series, nu, closure, f, scheme).residual


def force_balance_residual(
    series: SnapshotSeries,
    nu: float,
    closure: ClosureSpec = NO_MODEL,
    f: Field | None = None,
    scheme: GradientScheme = GradientScheme.CENTRAL,
) -> float:
    """Return the normalized residual of the momentum equation tested against f.

    F^2 = (u(T) - u_0, f)/(T |Omega|) - <(uu, grad f)/|Omega|>_T
          + <(1/|Omega|) int (2 nu + nu_turb) grad_s u : grad_s f>_T
    """
    forcing = _require_forcing(series, f)
    F = compute_F(forcing, scheme)
    if F == 0.0:
        raise UndefinedScaleError("the force balance is degenerate for f = 0")
    volume = series.grid.volume
    cell = series.grid.cell_volume
    duration = float(series.times[-1] - series.times[0])
    grad_f = gradient(forcing, scheme).values
    strain_f = sym_gradient(forcing, scheme).values

    advection, viscous = [], []
    for snapshot in series:
        u = snapshot.velocity.values
        uu = np.einsum("i...,j...->ij...", u, u)
        advection.append(float(np.sum(uu * grad_f)) * cell / volume)
        strain_u = sym_gradient(snapshot.velocity, scheme).values
        nu_turb = resolve_closure(closure, snapshot, scheme).nu_turb.values
        contraction = np.sum(strain_u * strain_f, axis=(0, 1))
        viscous.append(
            float(np.sum((2.0 * nu + nu_turb) * contraction)) * cell / volume
        )
    times = series.times
    change = inner_product(
        Field(series.grid, series[-1].velocity.values - series[0].velocity.values, 1),
        forcing,
    ) / (duration * volume)
    balance = (
        change
        - avg_T(TimeSeries(times, np.array(advection), "advection"), duration)
        + avg_T(TimeSeries(times, np.array(viscous), "viscous"), duration)
    )
    return (F**2 - balance) / F**2


def work_bound(
    series: SnapshotSeries,
    dissipation: DissipationSeries,
    F: float,
) -> WorkBound:
    """Return both sides of the averaged energy inequality.

    <eps>_T <= (E_0 - E_T)/(T |Omega|) + F <(1/|Omega|) ||u||^2>_T^(1/2)
    """
    energy = kinetic_energy_series(series)
    duration = energy.duration
    released = 0.5 * (energy.values[0] - energy.values[-1]) / duration
    return WorkBound(
        lhs=avg_T(dissipation.eps_total, duration),
        rhs=released + F * math.sqrt(avg_T(energy, duration)),
    )


def _gradient_energy_series(
    series: SnapshotSeries, scheme: GradientScheme
) -> TimeSeries:
    volume = series.grid.volume
    return TimeSeries(
        series.times,
        np.array([l2_norm_sq(gradient(s.velocity, scheme)) / volume for s in series]),
        "gradient energy",
    )


def taylor_microscale(
    series: SnapshotSeries,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    scheme: GradientScheme = GradientScheme.CENTRAL,
) -> float:
    """Return lambda_T = (15 <||u||^2>_inf / <||grad u||^2>_inf)^(1/2)."""
    energy = avg_inf(kinetic_energy_series(series), tail_fraction).value
    if energy == 0.0:
        raise ValidationError(
            "the Taylor microscale is undefined for a zero-energy record"
        )
    gradient_energy = avg_inf(
        _gradient_energy_series(series, scheme), tail_fraction
    ).value
    if gradient_energy == 0.0:
        raise ValidationError(
            "the Taylor microscale is undefined without velocity gradients"
        )
    return math.sqrt(15.0 * energy / gradient_energy)


def measure_inverse_constant(
    series: SnapshotSeries, scheme: GradientScheme = GradientScheme.CENTRAL
) -> float:
    """Return C_I = max over snapshots of h ||grad_s u|| / ||u||."""
    h = series.grid.h
    ratios = []
    for snapshot in series:
        energy = l2_norm_sq(snapshot.velocity)
        if energy == 0.0:
            continue
        strain = l2_norm_sq(sym_gradient(snapshot.velocity, scheme))
        ratios.append(h * math.sqrt(strain / energy))
    if not ratios:
        raise ValidationError(
            "the inverse constant is undefined for a zero-energy record"
        )
    return max(ratios)


def resolution_thresholds(
    Re: float, L: float, C_I: float, C_E: float
) -> tuple[float, float, float]:
    """Return (threshold_stmt, threshold_proof, lambda_criterion).

    threshold_stmt = 2 C_I C_E sqrt(15) Re^(-1/2) L,
    threshold_proof = sqrt(2) C_I C_E Re^(-1/2) L,
    lambda_criterion = (sqrt(30)/2) Re^(-1/2) L.
    """
    scale = L / math.sqrt(Re)
    return (
        2.0 * C_I * C_E * math.sqrt(15.0) * scale,
        math.sqrt(2.0) * C_I * C_E * scale,
        0.5 * math.sqrt(30.0) * scale,
    )


def classify_resolution(
    lambda_T: float, h: float, threshold_stmt: float, lambda_criterion: float
) -> ResolutionClass:
    """Apply the comparison rules of the resolution test."""
    if lambda_T <= lambda_criterion:
        return ResolutionClass.EV_NOT_NEEDED
    if h >= threshold_stmt:
        return ResolutionClass.EV_NEEDED
    return ResolutionClass.INDETERMINATE


def resolution_verdict(
    series: SnapshotSeries,
    scales: FlowScales,
    C_I: float,
    C_E: float = 1.0,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    scheme: GradientScheme = GradientScheme.CENTRAL,
) -> ResolutionVerdict:
    """Decide whether the mesh resolves the Taylor microscale of a model-free run."""
    if not scales.Re or not scales.L or not scales.h > 0:
        raise ValidationError("the resolution verdict needs positive Re, L and h")
    Re, L, h = scales.Re, scales.L, scales.h
    lambda_T = taylor_microscale(series, tail_fraction, scheme)
    threshold_stmt, threshold_proof, lambda_criterion = resolution_thresholds(
        Re, L, C_I, C_E
    )
    dissipation_scale = scales.U**3 / L
    return ResolutionVerdict(
        lambda_T=lambda_T,
        h=h,
        threshold_stmt=threshold_stmt,
        threshold_proof=threshold_proof,
        lambda_criterion=lambda_criterion,
        C_I=C_I,
        C_E=C_E,
        verdict=classify_resolution(lambda_T, h, threshold_stmt, lambda_criterion),
        under_dissipation_bound=(
            2.0 / Re * C_I**2 * C_E**2 * (h / L) ** -2 * dissipation_scale
        ),
        taylor_dissipation_estimate=(
            30.0 * C_E**2 / Re * (lambda_T / L) ** -2 * dissipation_scale
        ),
        kolmogorov_microscale=Re**-0.75 * L,
        taylor_scale_estimate=math.sqrt(15.0) * Re**-0.5 * L,
        h_over_lambda_T=h / lambda_T,
    )


def dissipation_bound_factor(beta: float, Re: float, ratio: float) -> float:
    """Return 2/(2-b) + 2/(b(2-b)) Re^-1 + ratio/(b(2-b))."""
    if not 0.0 < beta < 1.0:
        raise RangeError(f"beta must lie in (0, 1), got {beta}")
    denominator = beta * (2.0 - beta)
    return 2.0 / (2.0 - beta) + 2.0 / denominator / Re + ratio / denominator


def evaluate_bounds(
    dissipation: DissipationSeries,
    scales: FlowScales,
    stats: ClosureStats | None,
    betas: Sequence[float],
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
) -> tuple[BoundEvaluation, ...]:
    """Evaluate the dissipation bound and both rearranged forms at every beta."""
    for beta in betas:
        if not 0.0 < beta < 1.0:
            raise RangeError(f"beta must lie in (0, 1), got {beta}")
    if not scales.complete or scales.L is None or scales.Re is None:
        raise UndefinedScaleError("the dissipation bound needs positive U, L and Re")
    Re = scales.Re
    dissipation_scale = scales.U**3 / scales.L
    average = avg_inf(dissipation.eps_total, tail_fraction)
    ratio_nu = stats.ratio_nu if stats is not None else 0.0

    ratio_cor_a: float | None = None
    ratio_cor_b: float | None = None
    if stats is not None and stats.avg_l_over_L is not None:
        length_ratio = stats.mu * stats.avg_l_over_L
        if stats.U_prime_model is not None:
            ratio_cor_a = length_ratio * stats.U_prime_model / scales.U
            if scales.U_prime > 0.0:
                ratio_cor_b = (
                    length_ratio
                    * stats.U_prime_model
                    / scales.U_prime
                    * math.sqrt(scales.I)
                )

    def _rhs(beta: float, ratio: float | None) -> float | None:
        if ratio is None:
            return None
        return dissipation_bound_factor(beta, Re, ratio) * dissipation_scale

    evaluations = []
    for beta in betas:
        rhs = dissipation_bound_factor(beta, Re, ratio_nu) * dissipation_scale
        evaluations.append(
            BoundEvaluation(
                beta=beta,
                lhs=average.value,
                lhs_final=average.final,
                rhs_thm2=rhs,
                rhs_cor_a=_rhs(beta, ratio_cor_a),
                rhs_cor_b=_rhs(beta, ratio_cor_b),
                ratio_nu=ratio_nu,
                margin=rhs - average.value,
                margin_final=rhs - average.final,
            )
        )
    return tuple(evaluations)


def monitoring_statistics(
    stats: ClosureStats | None, flag_threshold: float = DEFAULT_FLAG_THRESHOLD
) -> tuple[MonitoringStatistic, ...]:
    """Return ratio_nu, avg_l_over_L and I_model, flagged above the threshold."""

    def _stat(name: str, value: float | None) -> MonitoringStatistic:
        flagged = value is not None and value > flag_threshold
        return MonitoringStatistic(name, value, flagged)

    if stats is None:
        return tuple(_stat(name, None) for name in MONITORED)
    return (
        _stat("ratio_nu", stats.ratio_nu),
        _stat("avg_l_over_L", stats.avg_l_over_L),
        _stat("I_model", stats.I_model),
    )


MONITORED = ("ratio_nu", "avg_l_over_L", "I_model")

_CAUSES = {
    "ratio_nu": "aggregate eddy viscosity avg(nu_turb)/(L U) is large",
    "avg_l_over_L": "mixing length parameterization l is too large",
    "I_model": "k' parameterization predicts an excessive turbulent intensity",
}


def assemble_report(
    *,
    provenance: str,
    inputs: dict[str, object],
    scales: FlowScales,
    stats: ClosureStats | None,
    dissipation: DissipationSummary | None,
    energy_residual_value: float | None,
    force_balance_value: float | None,
    work: WorkBound | None,
    lambda_T: float | None,
    C_I: float | None,
    resolution: ResolutionVerdict | None,
    bounds: Sequence[BoundEvaluation],
    warnings: Sequence[str],
    flag_threshold: float = DEFAULT_FLAG_THRESHOLD,
) -> DiagnosticsReport:
    """Assemble the report, attributing raised flags to their modelling choice."""
    monitoring = monitoring_statistics(stats, flag_threshold)
    flagged = tuple(stat.name for stat in monitoring if stat.flagged)
    if stats is None:
        dissipation_class = DissipationClass.UNAVAILABLE
    elif flagged:
        dissipation_class = DissipationClass.OVER_DISSIPATION_SUSPECTED
    else:
        dissipation_class = DissipationClass.NOT_OVER_DISSIPATING

    notes = list(warnings)
    notes.append(
        "F is the root-mean-square force ((1/|Omega|)||f||^2)^(1/2), the normalization "
        "the dissipation bound uses"
    )
    if resolution is not None:
        notes.append(
            "resolution thresholds: statement constant 2 sqrt(15) C_I C_E and proof "
            "constant sqrt(2) C_I C_E disagree; the verdict uses the statement constant"
        )
        notes.append(
            f"C_E = {resolution.C_E} is assumed, "
            "no reference resolved solution is available"
        )
    if bounds:
        notes.append(
            "lim sup averages are evaluated as the supremum of running averages "
            "over the tail window; final-horizon values are reported alongside"
        )
    if stats is not None and not stats.factored:
        notes.append(
            "closure supplies nu_turb only; "
            "length-scale and intensity statistics unavailable"
        )

    return DiagnosticsReport(
        provenance=provenance,
        inputs=inputs,
        scales=scales,
        closure_stats=stats,
        monitoring=monitoring,
        dissipation=dissipation,
        energy_residual=energy_residual_value,
        force_balance_residual=force_balance_value,
        work_bound=work,
        taylor_microscale=lambda_T,
        inverse_constant=C_I,
        resolution=resolution,
        bounds=tuple(bounds),
        verdicts=Verdicts(
            resolution=resolution.verdict if resolution is not None else None,
            dissipation=dissipation_class,
            causes=tuple(_CAUSES[name] for name in flagged),
        ),
        warnings=tuple(notes),
    )


def invariant_suite(
    series: SnapshotSeries,
    nu: float,
    closure: ClosureSpec = NO_MODEL,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    scheme: GradientScheme = GradientScheme.CENTRAL,
) -> tuple[InvariantCheck, ...]:
    """Run the consistency checks of the verify command on one record."""
    checks: list[InvariantCheck] = []
    rates = dissipation_series(series, nu, closure, scheme)
    energy = kinetic_energy_series(series)
    duration = energy.duration

    for a, b in ((rates.eps0, rates.eps_turb), (energy, rates.eps_total)):
        lhs, rhs = cs_in_time(a, b, duration)
        lhs_inf, rhs_inf = cs_in_time_inf(a, b, tail_fraction)
        checks.append(
            InvariantCheck(
                f"cauchy_schwarz[{a.name},{b.name}]",
                cs_holds(lhs, rhs) and cs_holds(lhs_inf, rhs_inf),
                f"finite {lhs:.6g} <= {rhs:.6g}; "
                f"long-time {lhs_inf:.6g} <= {rhs_inf:.6g}",
            )
        )
    lowest = min(float(rates.eps0.values.min()), float(rates.eps_turb.values.min()))
    checks.append(
        InvariantCheck(
            "dissipation_nonnegative", lowest >= 0.0, f"min rate {lowest:.6g}"
        )
    )

    forcing = series.forcing
    if forcing is None:
        _LOGGER.warning("No forcing in the record, skipping budget and scale checks")
        return tuple(checks)

    residual = energy_residual(series, nu, closure, forcing, scheme)
    checks.append(
        InvariantCheck(
            "energy_inequality",
            residual <= ENERGY_RESIDUAL_TOL,
            f"residual {residual:.6g} <= {ENERGY_RESIDUAL_TOL}",
        )
    )
    if compute_F(forcing, scheme) == 0.0:
        return tuple(checks)

    length = compute_L(forcing, scheme)
    checks.append(
        InvariantCheck(
            "length_scale_properties",
            length.residual_max <= 1e-12 * length.grad_max
            and length.residual_mean_sq <= 1e-12 * length.grad_mean_sq,
            f"residuals {length.residual_max:.3g}, {length.residual_mean_sq:.3g}",
        )
    )
    scales = flow_scales(series, nu, forcing, tail_fraction, scheme)
    if scales.complete:
        stats = closure_stats(series, closure, scales, tail_fraction, scheme)
        bound = stats.intensity_bound
        if bound is not None:
            checks.append(
                InvariantCheck(
                    "intensity_bound",
                    stats.ratio_nu <= bound * (1.0 + INTENSITY_BOUND_RTOL),
                    f"ratio_nu {stats.ratio_nu:.6g} <= {bound:.6g}",
                )
            )
    return tuple(checks)
