"""Force, velocity and length scales that nondimensionalize the statistics."""

from __future__ import annotations

from dataclasses import dataclass
import logging
import math

import numpy as np

from .const import DEFAULT_TAIL_FRACTION, SOLENOIDAL_RTOL
from .exceptions import UndefinedScaleError, ValidationError
from .grid import (
    Field,
    GradientScheme,
    SnapshotSeries,
    gradient,
    l2_norm_sq,
    solenoidal_defect,
)
from .timestats import TimeSeries, avg_inf

_LOGGER = logging.getLogger(__name__)

MIN_FLUCTUATION_SNAPSHOTS = 10


@dataclass(frozen=True)
class LengthScale:
    """The length scale L with its candidates and property residuals."""

    L: float
    candidates: tuple[float, float, float]
    grad_max: float
    grad_mean_sq: float
    residual_max: float
    residual_mean_sq: float

    @property
    def properties_hold(self) -> bool:
        """Return True when ||grad f||_inf <= F/L and mean |grad f|^2 <= F^2/L^2."""
        return self.residual_max <= 0.0 and self.residual_mean_sq <= 0.0


@dataclass(frozen=True)
class FlowScales:
    """Nondimensionalizing scales of one record."""

    F: float
    U: float
    U_prime: float
    L: float | None
    Re: float | None
    nu: float
    h: float
    I: float
    U_final: float
    U_prime_final: float
    U_prime_model: float | None = None
    I_model: float | None = None
    forcing_defect: float = 0.0

    @property
    def complete(self) -> bool:
        """Return True when L, U and Re are all positive."""
        return bool(self.L and self.U and self.Re)

    @property
    def dissipation_scale(self) -> float:
        """Return U^3 / L."""
        if not self.complete or self.L is None:
            raise UndefinedScaleError("U^3/L needs positive U and L")
        return self.U**3 / self.L

    @property
    def forcing_is_solenoidal(self) -> bool:
        """Return True when ||div f||/||grad f|| is within tolerance."""
        return self.forcing_defect <= SOLENOIDAL_RTOL


def compute_F(f: Field, scheme: GradientScheme = GradientScheme.CENTRAL) -> float:
    """Return the root-mean-square force ((1/|Omega|) ||f||^2)^(1/2)."""
    if f.rank != 1:
        raise ValidationError("forcing must be a vector field")
    defect = solenoidal_defect(f, scheme)
    if defect > SOLENOIDAL_RTOL:
        _LOGGER.warning("Forcing is not solenoidal: ||div f||/||grad f|| = %g", defect)
    return math.sqrt(l2_norm_sq(f) / f.grid.volume)


def compute_L(
    f: Field, scheme: GradientScheme = GradientScheme.CENTRAL
) -> LengthScale:
    """Return L = min{|Omega|^(1/3), F/||grad f||_inf, F/((1/|Omega|)||grad f||^2)}."""
    F = compute_F(f, scheme)
    if F == 0.0:
        raise UndefinedScaleError("L is undefined without forcing (F = 0)")
    grad_f = gradient(f, scheme)
    grad_max = float(np.max(grad_f.magnitude()))
    grad_mean_sq = l2_norm_sq(grad_f) / f.grid.volume
    candidates = (
        f.grid.volume ** (1.0 / 3.0),
        F / grad_max if grad_max > 0.0 else math.inf,
        F / grad_mean_sq if grad_mean_sq > 0.0 else math.inf,
    )
    L = min(candidates)
    return LengthScale(
        L=L,
        candidates=candidates,
        grad_max=grad_max,
        grad_mean_sq=grad_mean_sq,
        residual_max=grad_max - F / L,
        residual_mean_sq=grad_mean_sq - F**2 / L**2,
    )


def kinetic_energy_series(series: SnapshotSeries) -> TimeSeries:
    """Return (1/|Omega|) ||u||^2 per snapshot."""
    volume = series.grid.volume
    return TimeSeries(
        series.times,
        np.array([l2_norm_sq(s.velocity) / volume for s in series]),
        "kinetic energy",
    )


def compute_U(
    series: SnapshotSeries, tail_fraction: float = DEFAULT_TAIL_FRACTION
) -> float:
    """Return U = <(1/|Omega|) ||u||^2>_inf^(1/2)."""
    return math.sqrt(avg_inf(kinetic_energy_series(series), tail_fraction).value)


def time_mean_velocity(series: SnapshotSeries) -> Field:
    """Return the trapezoid-weighted pointwise time mean of the velocity."""
    weights = np.ones(len(series))
    weights[0] = weights[-1] = 0.5
    stacked = np.stack([s.velocity.values for s in series])
    mean = np.average(stacked, axis=0, weights=weights)
    return Field(series.grid, mean, 1, series.times[-1], "time-mean velocity")


def fluctuation_energy_series(series: SnapshotSeries) -> TimeSeries:
    """Return (1/|Omega|) ||u - u_mean||^2 per snapshot."""
    if len(series) < MIN_FLUCTUATION_SNAPSHOTS:
        raise ValidationError(
            f"fluctuations need at least {MIN_FLUCTUATION_SNAPSHOTS} snapshots"
        )
    mean = time_mean_velocity(series).values
    volume = series.grid.volume
    cell = series.grid.cell_volume
    return TimeSeries(
        series.times,
        np.array(
            [
                float(np.sum(np.square(s.velocity.values - mean))) * cell / volume
                for s in series
            ]
        ),
        "fluctuation energy",
    )


def compute_U_prime(
    series: SnapshotSeries, tail_fraction: float = DEFAULT_TAIL_FRACTION
) -> tuple[float, float]:
    """Return U' and the turbulent intensity I(u) = (U'/U)^2."""
    U_prime = math.sqrt(avg_inf(fluctuation_energy_series(series), tail_fraction).value)
    U = compute_U(series, tail_fraction)
    return U_prime, (U_prime / U) ** 2 if U > 0.0 else 0.0


def flow_scales(
    series: SnapshotSeries,
    nu: float,
    forcing: Field | None = None,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    scheme: GradientScheme = GradientScheme.CENTRAL,
) -> FlowScales:
    """Compute every scale of a record; L and Re are None without forcing."""
    if not nu > 0:
        raise ValidationError(f"viscosity must be positive, got {nu}")
    energy = avg_inf(kinetic_energy_series(series), tail_fraction)
    U = math.sqrt(energy.value)
    if len(series) >= MIN_FLUCTUATION_SNAPSHOTS:
        fluctuation = avg_inf(fluctuation_energy_series(series), tail_fraction)
        U_prime = math.sqrt(fluctuation.value)
        U_prime_final = math.sqrt(fluctuation.final)
    else:
        _LOGGER.warning("Record too short for fluctuations, reporting U' = 0")
        U_prime = U_prime_final = 0.0
    forcing = forcing if forcing is not None else series.forcing
    F = 0.0
    defect = 0.0
    L: float | None = None
    if forcing is not None:
        F = compute_F(forcing, scheme)
        defect = solenoidal_defect(forcing, scheme)
        if F > 0.0:
            L = compute_L(forcing, scheme).L
    return FlowScales(
        F=F,
        U=U,
        U_prime=U_prime,
        L=L,
        Re=L * U / nu if L is not None else None,
        nu=nu,
        h=series.grid.h,
        I=(U_prime / U) ** 2 if U > 0.0 else 0.0,
        U_final=math.sqrt(energy.final),
        U_prime_final=U_prime_final,
        forcing_defect=defect,
    )
