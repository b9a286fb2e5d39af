"""Test the pseudo-spectral solver."""

import logging
import math
from unittest.mock import patch

import numpy as np
import pytest

from evdiag.closures import NO_MODEL, ClosureKind, ClosureSpec
from evdiag.coordinator import DiagnosticsCoordinator
from evdiag.const import ENERGY_RESIDUAL_TOL
from evdiag.diagnostics import (
    energy_residual,
    force_balance_residual,
    taylor_microscale,
)
from evdiag.exceptions import SolverError, ValidationError
from evdiag.grid import Field, GradientScheme, SnapshotSeries, solenoidal_defect
from evdiag.models import AnalysisOptions
from evdiag.scales import kinetic_energy_series
from evdiag.solver import (
    ForcingKind,
    ForcingSpec,
    InitialKind,
    SolverConfig,
    SolverState,
    SpectralSolver,
    run,
    step,
)

from tests.common import TG_LAMBDA

SPECTRAL = GradientScheme.SPECTRAL
KOLMOGOROV = ForcingSpec(ForcingKind.KOLMOGOROV, amplitude=1.0, wavenumber=4)
SMAGORINSKY = ClosureSpec(ClosureKind.SMAGORINSKY, cs=0.17)


@pytest.mark.parametrize(
    "changes",
    [
        {"n": 48},
        {"n": 8},
        {"nu": 0.0},
        {"t_end": -1.0},
        {"cfl": 1.0},
        {"snapshot_every": 0},
        {"closure": ClosureSpec(ClosureKind.PRESCRIBED_FIELDS)},
        {"forcing": ForcingSpec(ForcingKind.KOLMOGOROV, wavenumber=6)},
        {"perturbation": -1.0},
    ],
)
def test_config_validation(changes: dict) -> None:
    """Test invalid run settings are refused."""
    settings = {"n": 16, "nu": 0.01, "t_end": 1.0, **changes}
    with pytest.raises(ValidationError):
        SolverConfig(**settings)


def test_perturbation_defaults() -> None:
    """Test forced runs are perturbed by default and decaying runs are not."""
    assert SolverConfig(n=16, nu=0.01, t_end=1.0).perturbation_amplitude == 0.0
    forced = SolverConfig(n=16, nu=0.01, t_end=1.0, forcing=KOLMOGOROV)
    assert forced.perturbation_amplitude == 1e-3
    explicit = SolverConfig(
        n=16, nu=0.01, t_end=1.0, forcing=KOLMOGOROV, perturbation=0.0
    )
    assert explicit.perturbation_amplitude == 0.0


def test_projection_removes_divergence() -> None:
    """Test the Leray projection leaves k . v_hat = 0."""
    solver = SpectralSolver(SolverConfig(n=32, nu=0.01, t_end=1.0))
    rng = np.random.default_rng(3)
    v_hat = solver.project(solver.transform(rng.standard_normal((2, 32, 32))))
    assert np.max(np.abs(solver.kx * v_hat[0] + solver.ky * v_hat[1])) < 1e-10


def test_random_perturbation() -> None:
    """Test the seeded perturbation is solenoidal, zero-mean and has the given rms."""
    solver = SpectralSolver(SolverConfig(n=32, nu=0.01, t_end=1.0, seed=7))
    noise = solver.random_solenoidal(0.1)
    rms = math.sqrt(float(np.mean(np.sum(np.square(noise), axis=0))))
    assert rms == pytest.approx(0.1)
    assert np.max(np.abs(np.mean(noise, axis=(1, 2)))) < 1e-14
    field = Field(solver.grid, noise.reshape(2, 32, 32, 1), 1)
    assert solenoidal_defect(field, SPECTRAL) < 1e-12
    np.testing.assert_array_equal(noise, solver.random_solenoidal(0.1))


def test_single_step() -> None:
    """Test one CFL-limited step advances time and keeps the vortex shape."""
    config = SolverConfig(n=16, nu=0.01, t_end=1.0)
    state = SpectralSolver(config).initial_state()
    advanced = step(state, config)
    assert advanced.step == 1
    assert advanced.time == pytest.approx(0.5 * 2.0 * math.pi / 16)
    modes = np.abs(state.u_hat) > 1e-8 * np.max(np.abs(state.u_hat))
    ratio = advanced.u_hat[modes] / state.u_hat[modes]
    np.testing.assert_allclose(ratio, math.exp(-0.02 * advanced.time), rtol=1e-12)


def test_zero_state_stays_zero() -> None:
    """Test still fluid without forcing stays still."""
    series = run(SolverConfig(n=16, nu=0.1, t_end=0.5, initial=InitialKind.ZERO))
    assert len(series) >= 2
    assert all(not np.any(s.velocity.values) for s in series)


def test_taylor_green_decay(solver_taylor_green: SnapshotSeries) -> None:
    """Test the kinetic energy decays as e^(-4 nu t)."""
    energy = kinetic_energy_series(solver_taylor_green)
    expected = energy.values[0] * np.exp(-0.04 * energy.times)
    np.testing.assert_allclose(energy.values, expected, rtol=1e-5)
    assert energy.values[0] == pytest.approx(0.5, rel=1e-12)
    assert solver_taylor_green.times[-1] == pytest.approx(5.0)


def test_taylor_green_diagnostics(solver_taylor_green: SnapshotSeries) -> None:
    """Test lambda_T and the energy residual of the solver output."""
    assert taylor_microscale(
        solver_taylor_green, scheme=SPECTRAL
    ) == pytest.approx(TG_LAMBDA, rel=1e-2)
    residual = energy_residual(solver_taylor_green, 0.01, scheme=SPECTRAL)
    assert residual <= 1e-4


def test_solver_output_is_solenoidal(solver_taylor_green: SnapshotSeries) -> None:
    """Test every snapshot is divergence-free to rounding."""
    for snapshot in solver_taylor_green:
        assert solenoidal_defect(snapshot.velocity, SPECTRAL) <= 1e-12


def test_snapshot_times_are_uniform(solver_taylor_green: SnapshotSeries) -> None:
    """Test snapshots land on a uniform grid ending at t_end."""
    steps = np.diff(solver_taylor_green.times)
    np.testing.assert_allclose(steps, steps[0], rtol=1e-12)
    assert solver_taylor_green[0].forcing is not None
    assert not np.any(solver_taylor_green[0].forcing.values)


def _forced_config(dealias: bool = True) -> SolverConfig:
    return SolverConfig(
        n=32, nu=0.05, t_end=2.0, forcing=KOLMOGOROV, cfl=0.1, dealias=dealias
    )


def test_unforced_energy_is_nonincreasing() -> None:
    """Test the kinetic energy of a perturbed decaying run never grows."""
    series = run(SolverConfig(n=32, nu=0.01, t_end=2.0, perturbation=0.1, seed=1))
    energy = kinetic_energy_series(series).values
    assert len(energy) > 10
    assert np.all(np.diff(energy) <= 1e-10 * energy[:-1])


def test_mean_mode_is_conserved() -> None:
    """Test a zero-mean force leaves the mean velocity unchanged."""
    solver = SpectralSolver(
        SolverConfig(n=16, nu=0.02, t_end=1.0, forcing=KOLMOGOROV, closure=SMAGORINSKY)
    )
    u_hat = solver.initial_state().u_hat.copy()
    u_hat[:, 0, 0] += 16**2 * np.array([0.3, -0.2])
    advanced = solver.advance(SolverState(u_hat), 0.5, 40)
    velocity = solver.snapshot(advanced, advanced.time).velocity.values
    np.testing.assert_allclose(
        np.mean(velocity, axis=(1, 2, 3)), [0.3, -0.2], rtol=0, atol=1e-12
    )


@pytest.mark.parametrize("dealias", [True, False])
def test_energy_inequality_of_forced_run(dealias: bool) -> None:
    """Test the energy inequality holds with and without dealiasing."""
    series = run(_forced_config(dealias))
    assert energy_residual(series, 0.05, scheme=SPECTRAL) <= ENERGY_RESIDUAL_TOL


def test_force_balance_of_forced_run() -> None:
    """Test the momentum equation tested against f balances F^2 on solver output."""
    series = run(_forced_config())
    assert abs(force_balance_residual(series, 0.05, scheme=SPECTRAL)) <= 0.05


def test_zero_smagorinsky_constant_is_no_model() -> None:
    """Test Cs = 0 reproduces the model-free run exactly."""
    base = SolverConfig(n=16, nu=0.05, t_end=0.5, forcing=KOLMOGOROV)
    free = run(base)
    zero = run(
        SolverConfig(
            n=16,
            nu=0.05,
            t_end=0.5,
            forcing=KOLMOGOROV,
            closure=ClosureSpec(ClosureKind.SMAGORINSKY, cs=0.0),
        )
    )
    for a, b in zip(free, zero, strict=True):
        np.testing.assert_array_equal(a.velocity.values, b.velocity.values)


def test_runs_are_deterministic() -> None:
    """Test identical configs give identical records."""
    config = SolverConfig(
        n=16, nu=0.02, t_end=0.3, forcing=KOLMOGOROV, closure=SMAGORINSKY, seed=5
    )
    for a, b in zip(run(config), run(config), strict=True):
        np.testing.assert_array_equal(a.velocity.values, b.velocity.values)
        assert a.nu_turb is not None
        assert b.nu_turb is not None
        np.testing.assert_array_equal(a.nu_turb.values, b.nu_turb.values)


def test_smagorinsky_snapshot_fields() -> None:
    """Test a Smagorinsky run stores factored closure fields and the force."""
    series = run(
        SolverConfig(n=16, nu=0.02, t_end=0.2, forcing=KOLMOGOROV, closure=SMAGORINSKY)
    )
    last = series[-1]
    assert last.mixing_length is not None
    assert last.kprime is not None
    assert last.forcing is not None
    np.testing.assert_allclose(last.mixing_length.values, 0.17 * series.grid.h)


def test_sink_receives_every_snapshot() -> None:
    """Test the sink gets consecutive indices and the run keeps no snapshots."""
    config = SolverConfig(n=16, nu=0.05, t_end=0.3)
    received: list[tuple[int, float]] = []
    streamed = run(
        config, lambda index, snapshot: received.append((index, snapshot.time))
    )
    assert streamed is None
    series = run(config)
    assert [index for index, _ in received] == list(range(len(series)))
    assert [t for _, t in received] == list(series.times)


def test_step_is_halved_on_cfl_violation(caplog: pytest.LogCaptureFixture) -> None:
    """Test an interval too long for one step is retried with more steps."""
    solver = SpectralSolver(SolverConfig(n=16, nu=0.01, t_end=1.0))
    state = solver.initial_state()
    with caplog.at_level(logging.WARNING):
        advanced = solver.advance(state, 10.0 * solver.h, 1)
    assert advanced.step == 16
    assert "CFL exceeded" in caplog.text


def test_cfl_retries_are_bounded() -> None:
    """Test the solver gives up once the retries are exhausted."""
    solver = SpectralSolver(SolverConfig(n=16, nu=0.01, t_end=1.0))
    state = solver.initial_state()
    with (
        patch("evdiag.solver.MAX_CFL_RETRIES", 0),
        pytest.raises(SolverError, match="CFL"),
    ):
        solver.advance(state, 10.0 * solver.h, 1)


def test_non_finite_state_fails() -> None:
    """Test a blow-up is reported with its step index."""
    solver = SpectralSolver(SolverConfig(n=16, nu=0.01, t_end=1.0))
    state = solver.initial_state()
    with (
        patch.object(
            solver, "rhs", return_value=np.full(state.u_hat.shape, np.nan + 0j)
        ),
        pytest.raises(SolverError) as err,
    ):
        solver.step(state, 0.01)
    assert err.value.step_index == 1


@pytest.mark.parametrize("n", [16, 32])
def test_under_resolved_dissipation_bound(n: int) -> None:
    """Test avg_inf(eps_0) <= 2 Re^-1 C_I^2 C_E^2 (h/L)^-2 U^3/L on coarse runs."""
    series = run(SolverConfig(n=n, nu=5e-4, t_end=2.0, forcing=KOLMOGOROV))
    options = AnalysisOptions(nu=5e-4, closure=NO_MODEL, gradient_scheme=SPECTRAL)
    report = DiagnosticsCoordinator(series, options).refresh()
    assert report.resolution is not None
    assert report.dissipation is not None
    resolution = report.resolution
    assert report.dissipation.eps0.value <= resolution.under_dissipation_bound * (
        1.0 + 1e-12
    )
    assert resolution.threshold_stmt / resolution.threshold_proof == pytest.approx(
        math.sqrt(30.0), rel=1e-12
    )
    assert any("C_E = 1.0 is assumed" in note for note in report.warnings)


@pytest.mark.slow
def test_forced_smagorinsky_dissipation_bound() -> None:
    """Test the dissipation bound on a long Kolmogorov-forced Smagorinsky run."""
    config = SolverConfig(
        n=128,
        nu=5e-4,
        t_end=200.0,
        forcing=KOLMOGOROV,
        closure=SMAGORINSKY,
        snapshot_every=200,
    )
    series = run(config)
    options = AnalysisOptions(
        nu=5e-4, closure=SMAGORINSKY, tail_fraction=0.5, gradient_scheme=SPECTRAL
    )
    report = DiagnosticsCoordinator(series, options).refresh()
    assert report.scales.U > 0.0
    assert [bound.beta for bound in report.bounds] == [0.25, 0.5, 0.75]
    for bound in report.bounds:
        assert bound.margin >= -0.05 * bound.rhs_thm2
    assert report.closure_stats is not None
    assert report.closure_stats.intensity_bound is not None
    assert report.closure_stats.ratio_nu <= report.closure_stats.intensity_bound * (
        1.0 + 1e-10
    )
