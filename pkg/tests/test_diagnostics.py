"""Test dissipation statistics, budgets, verdicts and bounds."""

from dataclasses import replace
import math

import numpy as np
import pytest

from evdiag.closures import NO_MODEL, ClosureSpec, ClosureStats
from evdiag.diagnostics import (
    DissipationSeries,
    EnergyBudget,
    assemble_report,
    classify_resolution,
    dissipation_bound_factor,
    dissipation_density,
    dissipation_series,
    energy_budget,
    energy_residual,
    evaluate_bounds,
    force_balance_residual,
    invariant_suite,
    measure_inverse_constant,
    monitoring_statistics,
    resolution_thresholds,
    resolution_verdict,
    taylor_microscale,
    work_bound,
)
from evdiag.exceptions import RangeError, UndefinedScaleError, ValidationError
from evdiag.grid import Field, GradientScheme, Grid, Snapshot, SnapshotSeries
from evdiag.models import (
    AnalysisOptions,
    DiagnosticsReport,
    DissipationClass,
    ResolutionClass,
)
from evdiag.scales import flow_scales
from evdiag.timestats import TimeSeries

from tests.common import (
    TG_LAMBDA,
    kolmogorov_flow,
    kolmogorov_forcing,
    make_scales,
    make_series,
    taylor_green,
)

SPECTRAL = GradientScheme.SPECTRAL
NU = 0.05


@pytest.fixture
def steady_kolmogorov(grid: Grid) -> SnapshotSeries:
    """Return the laminar Kolmogorov flow, an exact steady solution."""
    return make_series(
        lambda t: kolmogorov_flow(grid, NU, time=t),
        [0.0, 0.5, 1.0, 1.5],
        forcing=kolmogorov_forcing(grid),
    )


def _zero_force(grid: Grid) -> Field:
    return Field.vector(grid, [np.zeros(grid.shape)] * 2, name="forcing")


def _rates(eps_total: TimeSeries) -> DissipationSeries:
    zero = TimeSeries(eps_total.times, np.zeros_like(eps_total.values))
    return DissipationSeries(zero, eps_total, eps_total)


def _stats(ratio_nu: float = 0.3, avg_l_over_L: float = 0.2) -> ClosureStats:
    return ClosureStats(
        mu=0.5,
        avg_nu_turb=ratio_nu * 2.0,
        ratio_nu=ratio_nu,
        avg_l=avg_l_over_L * 2.0,
        U_prime_model=0.4,
        I_model=0.16,
        avg_l_over_L=avg_l_over_L,
        U_prime_model_over_U_prime=0.8,
    )


def test_dissipation_of_taylor_green(taylor_green_series: SnapshotSeries) -> None:
    """Test eps_0 = nu e^(-4 nu t) and eps_turb = nu_t e^(-4 nu t) / 2."""
    rates = dissipation_series(
        taylor_green_series, 0.01, ClosureSpec(nu_t=0.2), SPECTRAL
    )
    decay = np.exp(-0.04 * taylor_green_series.times)
    np.testing.assert_allclose(rates.eps0.values, 0.01 * decay, rtol=1e-12)
    np.testing.assert_allclose(rates.eps_turb.values, 0.1 * decay, rtol=1e-12)
    np.testing.assert_allclose(rates.eps_total.values, 0.11 * decay, rtol=1e-12)
    summary = rates.summary()
    assert summary.eps_total.value == pytest.approx(
        summary.eps0.value + summary.eps_turb.value
    )


def test_dissipation_density(grid: Grid) -> None:
    """Test the per-cell dissipation fields."""
    x, y = grid.coordinates()
    viscous, model = dissipation_density(
        Snapshot(taylor_green(grid)), 0.01, ClosureSpec(nu_t=0.2), SPECTRAL
    )
    strain_sq = 2.0 * np.cos(x) ** 2 * np.cos(y) ** 2
    np.testing.assert_allclose(viscous.values, 0.02 * strain_sq, atol=1e-14)
    np.testing.assert_allclose(model.values, 0.2 * strain_sq, atol=1e-14)


def test_dissipation_needs_viscosity(taylor_green_series: SnapshotSeries) -> None:
    """Test nu must be positive."""
    with pytest.raises(ValidationError):
        dissipation_series(taylor_green_series, -1.0)


def test_energy_residual_of_decaying_vortex(
    grid: Grid, taylor_green_series: SnapshotSeries
) -> None:
    """Test the energy equality closes for the analytic decay."""
    budget = energy_budget(
        taylor_green_series, 0.01, NO_MODEL, _zero_force(grid), SPECTRAL
    )
    assert budget.kinetic_start == pytest.approx(math.pi**2)
    assert budget.work == 0.0
    assert abs(budget.residual) < 1e-6


def test_energy_residual_of_steady_flow(steady_kolmogorov: SnapshotSeries) -> None:
    """Test the work of the force balances the dissipation of the laminar flow."""
    residual = energy_residual(steady_kolmogorov, NU, scheme=SPECTRAL)
    assert abs(residual) < 1e-12


def test_energy_residual_detects_missing_dissipation(
    grid: Grid, taylor_green_series: SnapshotSeries
) -> None:
    """Test an overstated viscosity makes the residual positive."""
    residual = energy_residual(
        taylor_green_series, 0.02, NO_MODEL, _zero_force(grid), SPECTRAL
    )
    assert residual > 1e-3


def test_energy_budget_needs_forcing(taylor_green_series: SnapshotSeries) -> None:
    """Test the budget refuses a record without f."""
    with pytest.raises(ValidationError):
        energy_residual(taylor_green_series, 0.01)


def test_degenerate_budget() -> None:
    """Test the residual of an empty budget."""
    assert EnergyBudget(0.0, 0.0, 0.0, 0.0).residual == 0.0
    assert EnergyBudget(0.0, 1.0, 0.0, 0.0).residual == math.inf


def test_force_balance_of_steady_flow(steady_kolmogorov: SnapshotSeries) -> None:
    """Test the momentum equation tested against f balances F^2."""
    residual = force_balance_residual(steady_kolmogorov, NU, scheme=SPECTRAL)
    assert abs(residual) < 1e-10


def test_force_balance_needs_force(
    grid: Grid, taylor_green_series: SnapshotSeries
) -> None:
    """Test f = 0 leaves the force balance undefined."""
    with pytest.raises(UndefinedScaleError):
        force_balance_residual(taylor_green_series, 0.01, f=_zero_force(grid))


def test_work_bound_is_sharp_for_steady_flow(
    steady_kolmogorov: SnapshotSeries,
) -> None:
    """Test <eps>_T <= F <U^2>_T^(1/2) holds with equality for the laminar flow."""
    rates = dissipation_series(steady_kolmogorov, NU, scheme=SPECTRAL)
    F = 1.0 / math.sqrt(2.0)
    bound = work_bound(steady_kolmogorov, rates, F)
    assert bound.lhs == pytest.approx(1.0 / (2.0 * NU * 16.0), rel=1e-12)
    assert bound.lhs == pytest.approx(bound.rhs, rel=1e-12)
    assert bound.margin == pytest.approx(0.0, abs=1e-10)


def test_taylor_microscale(taylor_green_series: SnapshotSeries) -> None:
    """Test lambda_T of the vortex is sqrt(15/2)."""
    assert taylor_microscale(taylor_green_series, scheme=SPECTRAL) == pytest.approx(
        TG_LAMBDA, rel=1e-12
    )


@pytest.mark.parametrize("scheme", list(GradientScheme))
@pytest.mark.parametrize("c", [0.1, 3.0, -2.0])
def test_taylor_microscale_is_scale_free(
    taylor_green_series: SnapshotSeries, scheme: GradientScheme, c: float
) -> None:
    """Test lambda_T is unchanged when the velocity is multiplied by a constant."""
    scaled = SnapshotSeries.from_velocities(
        [snapshot.velocity.scaled(c) for snapshot in taylor_green_series]
    )
    assert taylor_microscale(scaled, scheme=scheme) == pytest.approx(
        taylor_microscale(taylor_green_series, scheme=scheme), rel=1e-12
    )


def test_taylor_microscale_of_still_fluid(grid: Grid) -> None:
    """Test lambda_T is undefined without energy."""
    series = SnapshotSeries.from_velocities(
        [Field.vector(grid, [np.zeros(grid.shape)] * 2, t) for t in (0.0, 1.0)]
    )
    with pytest.raises(ValidationError):
        taylor_microscale(series)
    with pytest.raises(ValidationError):
        measure_inverse_constant(series)


def test_inverse_constant(taylor_green_series: SnapshotSeries) -> None:
    """Test C_I = h ||grad_s u|| / ||u|| is h for the vortex."""
    C_I = measure_inverse_constant(taylor_green_series, SPECTRAL)
    assert C_I == pytest.approx(taylor_green_series.grid.h, rel=1e-12)


def test_thresholds_differ_by_sqrt_30() -> None:
    """Test the statement and proof thresholds differ by sqrt(30)."""
    stmt, proof, criterion = resolution_thresholds(400.0, 1.5, 0.8, 1.0)
    assert stmt / proof == pytest.approx(math.sqrt(30.0), rel=1e-12)
    assert criterion == pytest.approx(math.sqrt(30.0) / 2.0 * 1.5 / 20.0)


@pytest.mark.parametrize(
    ("lambda_T", "h", "expected"),
    [
        (0.1, 0.5, ResolutionClass.EV_NOT_NEEDED),
        (2.0, 0.5, ResolutionClass.EV_NEEDED),
        (2.0, 0.05, ResolutionClass.INDETERMINATE),
    ],
)
def test_classify_resolution(
    lambda_T: float, h: float, expected: ResolutionClass
) -> None:
    """Test the comparison rules of the resolution test."""
    assert classify_resolution(lambda_T, h, 0.2, 0.3) is expected


def test_resolution_verdict(kolmogorov_series: SnapshotSeries) -> None:
    """Test the verdict record of a forced model-free run."""
    scales = flow_scales(kolmogorov_series, NU, scheme=SPECTRAL)
    C_I = measure_inverse_constant(kolmogorov_series, SPECTRAL)
    verdict = resolution_verdict(kolmogorov_series, scales, C_I, scheme=SPECTRAL)
    assert scales.Re is not None
    assert scales.L is not None
    assert verdict.threshold_stmt / verdict.threshold_proof == pytest.approx(
        math.sqrt(30.0), rel=1e-12
    )
    assert verdict.kolmogorov_microscale == pytest.approx(
        scales.Re**-0.75 * scales.L
    )
    assert verdict.taylor_scale_estimate == pytest.approx(
        math.sqrt(15.0) * scales.Re**-0.5 * scales.L
    )
    assert verdict.h_over_lambda_T == pytest.approx(verdict.h / verdict.lambda_T)
    assert verdict.C_E == 1.0
    assert verdict.verdict in ResolutionClass


def test_resolution_verdict_needs_forcing(
    taylor_green_series: SnapshotSeries,
) -> None:
    """Test the verdict needs Re and L."""
    scales = flow_scales(taylor_green_series, 0.01)
    with pytest.raises(ValidationError):
        resolution_verdict(taylor_green_series, scales, 1.0)


def test_dissipation_bound_factor() -> None:
    """Test the bound factor at beta = 1/2, Re = 100, ratio = 0.3."""
    assert dissipation_bound_factor(0.5, 100.0, 0.3) == pytest.approx(1.76)


@pytest.mark.parametrize("beta", [0.0, 1.0, -0.5, 2.0])
def test_dissipation_bound_factor_range(beta: float) -> None:
    """Test beta must lie in (0, 1)."""
    with pytest.raises(RangeError):
        dissipation_bound_factor(beta, 100.0, 0.3)


def test_evaluate_bounds() -> None:
    """Test the dissipation bound and its rearranged forms."""
    times = np.linspace(0.0, 1.0, 5)
    eps = _rates(TimeSeries(times, np.full(5, 0.3), "eps_total"))
    scales = make_scales(U=1.0, L=2.0, U_prime=0.5)
    bounds = evaluate_bounds(eps, scales, _stats(), (0.25, 0.5))
    assert [b.beta for b in bounds] == [0.25, 0.5]
    half = bounds[1]
    assert half.lhs == half.lhs_final == 0.3
    assert half.rhs_thm2 == pytest.approx(
        dissipation_bound_factor(0.5, 200.0, 0.3) * 0.5
    )
    assert half.rhs_cor_a == pytest.approx(
        dissipation_bound_factor(0.5, 200.0, 0.5 * 0.2 * 0.4) * 0.5
    )
    assert half.rhs_cor_b == pytest.approx(half.rhs_cor_a)
    assert half.margin == pytest.approx(half.rhs_thm2 - 0.3)


def test_evaluate_bounds_without_closure() -> None:
    """Test a model-free bound uses ratio_nu = 0 and skips the rearranged forms."""
    eps = _rates(TimeSeries(np.linspace(0.0, 1.0, 3), np.ones(3)))
    (bound,) = evaluate_bounds(eps, make_scales(), None, (0.5,))
    assert bound.ratio_nu == 0.0
    assert bound.rhs_cor_a is None
    assert bound.rhs_cor_b is None


def test_evaluate_bounds_checks_inputs() -> None:
    """Test bad betas and incomplete scales are refused."""
    eps = _rates(TimeSeries(np.linspace(0.0, 1.0, 3), np.ones(3)))
    with pytest.raises(RangeError):
        evaluate_bounds(eps, make_scales(), None, (0.5, 1.0))
    incomplete = replace(make_scales(), L=None, Re=None)
    with pytest.raises(UndefinedScaleError):
        evaluate_bounds(eps, incomplete, None, (0.5,))


def test_monitoring_flags() -> None:
    """Test statistics above the threshold are flagged."""
    ratio, length, intensity = monitoring_statistics(_stats(ratio_nu=20.0), 10.0)
    assert ratio.flagged
    assert not length.flagged
    assert not intensity.flagged
    assert all(
        stat.value is None and not stat.flagged
        for stat in monitoring_statistics(None)
    )


def _report(
    stats: ClosureStats | None, flag_threshold: float = 10.0
) -> DiagnosticsReport:
    return assemble_report(
        provenance="digest",
        inputs={},
        scales=make_scales(),
        stats=stats,
        dissipation=None,
        energy_residual_value=None,
        force_balance_value=None,
        work=None,
        lambda_T=None,
        C_I=None,
        resolution=None,
        bounds=(),
        warnings=("first",),
        flag_threshold=flag_threshold,
    )


def test_report_attributes_flags() -> None:
    """Test a flagged statistic names its modelling cause."""
    report = _report(_stats(ratio_nu=20.0, avg_l_over_L=15.0))
    assert report.flags_raised
    assert report.verdicts.dissipation is DissipationClass.OVER_DISSIPATION_SUSPECTED
    assert len(report.verdicts.causes) == 2
    assert "mixing length" in report.verdicts.causes[1]
    assert report.warnings[0] == "first"


def test_report_without_closure() -> None:
    """Test the dissipation verdict is unavailable without closure statistics."""
    report = _report(None)
    assert not report.flags_raised
    assert report.verdicts.dissipation is DissipationClass.UNAVAILABLE
    assert report.verdicts.resolution is None


def test_report_threshold() -> None:
    """Test raising the threshold clears the flag."""
    report = _report(_stats(ratio_nu=20.0), flag_threshold=50.0)
    assert not report.flags_raised
    assert report.verdicts.dissipation is DissipationClass.NOT_OVER_DISSIPATING


def test_invariant_suite_on_steady_flow(steady_kolmogorov: SnapshotSeries) -> None:
    """Test every invariant holds for an exact solution."""
    checks = invariant_suite(steady_kolmogorov, NU, scheme=SPECTRAL)
    names = [check.name for check in checks]
    assert "energy_inequality" in names
    assert "length_scale_properties" in names
    assert all(check.passed for check in checks), checks


def test_invariant_suite_without_forcing(
    taylor_green_series: SnapshotSeries,
) -> None:
    """Test only the budget-free checks run without forcing."""
    checks = invariant_suite(taylor_green_series, 0.01, ClosureSpec(nu_t=0.1))
    assert len(checks) == 3
    assert all(check.passed for check in checks)


def test_invariant_suite_checks_intensity_bound(
    kolmogorov_series: SnapshotSeries, smagorinsky_options: AnalysisOptions
) -> None:
    """Test a factored closure adds the intensity bound check."""
    checks = invariant_suite(
        kolmogorov_series, NU, smagorinsky_options.closure, scheme=SPECTRAL
    )
    bound = next(check for check in checks if check.name == "intensity_bound")
    assert bound.passed
