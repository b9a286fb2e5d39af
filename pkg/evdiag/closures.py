"""Eddy viscosity closures and their space-time statistics.

Every closure is expressed through the Kolmogorov-Prandtl form
``nu_turb = sqrt(2) * mu * l * sqrt(k')``. Closures that only supply
``nu_turb`` (constant viscosity, or prescribed ``nu_turb`` without a length
scale) are unfactored and carry no length-scale or intensity statistics.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum
import logging
import math

import numpy as np

from .const import DEFAULT_SMAGORINSKY_CS, DEFAULT_TAIL_FRACTION
from .exceptions import ClosureInputError, UndefinedScaleError, ValidationError
from .grid import (
    Field,
    GradientScheme,
    Snapshot,
    SnapshotSeries,
    sym_gradient,
)
from .scales import FlowScales
from .timestats import TimeSeries, avg_inf

_LOGGER = logging.getLogger(__name__)


class ClosureKind(StrEnum):
    """Supported eddy viscosity parameterizations."""

    CONSTANT_NU = "constant_nu"
    SMAGORINSKY = "smagorinsky"
    PRESCRIBED_FIELDS = "prescribed_fields"


@dataclass(frozen=True)
class ClosureSpec:
    """A closure choice with its calibration parameter and settings."""

    kind: ClosureKind = ClosureKind.CONSTANT_NU
    mu: float = 1.0
    nu_t: float = 0.0
    cs: float = DEFAULT_SMAGORINSKY_CS

    def __post_init__(self) -> None:
        """Validate the closure parameters."""
        object.__setattr__(self, "kind", ClosureKind(self.kind))
        if not self.mu >= 0:
            raise ValidationError(f"mu must be nonnegative, got {self.mu}")
        if not self.nu_t >= 0:
            raise ValidationError(f"nu_t must be nonnegative, got {self.nu_t}")
        if not self.cs >= 0:
            raise ValidationError(f"Cs must be nonnegative, got {self.cs}")


NO_MODEL = ClosureSpec(ClosureKind.CONSTANT_NU, nu_t=0.0)


@dataclass(frozen=True, eq=False)
class ClosureFields:
    """Eddy viscosity of one snapshot, with its (l, k') factoring when known."""

    nu_turb: Field
    mixing_length: Field | None = None
    kprime: Field | None = None

    @property
    def factored(self) -> bool:
        """Return True when l and k' are available."""
        return self.mixing_length is not None and self.kprime is not None


@dataclass(frozen=True)
class ClosureStats:
    """Space-time statistics of a closure over a record."""

    mu: float
    avg_nu_turb: float
    ratio_nu: float
    avg_l: float | None = None
    U_prime_model: float | None = None
    I_model: float | None = None
    avg_l_over_L: float | None = None
    U_prime_model_over_U_prime: float | None = None

    @property
    def factored(self) -> bool:
        """Return True when the length scale and intensity statistics exist."""
        return self.avg_l is not None and self.I_model is not None

    @property
    def intensity_bound(self) -> float | None:
        """Return mu (avg(l)/L) sqrt(I_model), the bound on ratio_nu."""
        if self.avg_l_over_L is None or self.I_model is None:
            return None
        return self.mu * self.avg_l_over_L * math.sqrt(self.I_model)


def _check_nonnegative(field: Field) -> None:
    if np.any(field.values < 0.0):
        raise ClosureInputError(f"{field.name} has negative values")


def nu_turb_field(l: Field, kprime: Field, mu: float) -> Field:
    """Return the Kolmogorov-Prandtl eddy viscosity sqrt(2) mu l sqrt(k')."""
    _check_nonnegative(l)
    _check_nonnegative(kprime)
    if l.grid != kprime.grid:
        raise ValidationError("l and k' live on different grids")
    values = math.sqrt(2.0) * mu * l.values * np.sqrt(kprime.values)
    return Field(l.grid, values, 0, l.time, "nu_turb")


def smagorinsky_fields(
    u: Field, cs: float, scheme: GradientScheme = GradientScheme.CENTRAL
) -> tuple[Field, Field]:
    """Return l = Cs h and k' = l^2 |grad_s u|^2 / 2 for the Smagorinsky model."""
    grid = u.grid
    l = cs * grid.h
    strain_sq = sym_gradient(u, scheme).magnitude_sq()
    return (
        Field(grid, np.full(grid.shape, l), 0, u.time, "mixing length"),
        Field(grid, 0.5 * l**2 * strain_sq, 0, u.time, "kprime"),
    )


def resolve_closure(
    spec: ClosureSpec,
    snapshot: Snapshot,
    scheme: GradientScheme = GradientScheme.CENTRAL,
) -> ClosureFields:
    """Return the eddy viscosity of one snapshot under a closure."""
    grid = snapshot.grid
    match spec.kind:
        case ClosureKind.CONSTANT_NU:
            return ClosureFields(
                Field(grid, np.full(grid.shape, spec.nu_t), 0, snapshot.time, "nu_turb")
            )
        case ClosureKind.SMAGORINSKY:
            l, kprime = smagorinsky_fields(snapshot.velocity, spec.cs, scheme)
            return ClosureFields(nu_turb_field(l, kprime, spec.mu), l, kprime)
    if snapshot.mixing_length is not None and snapshot.kprime is not None:
        return ClosureFields(
            nu_turb_field(snapshot.mixing_length, snapshot.kprime, spec.mu),
            snapshot.mixing_length,
            snapshot.kprime,
        )
    if snapshot.nu_turb is not None:
        _check_nonnegative(snapshot.nu_turb)
        return ClosureFields(snapshot.nu_turb)
    raise ClosureInputError(
        f"snapshot at t={snapshot.time} carries neither (l, k') nor nu_turb"
    )


def closure_stats(
    series: SnapshotSeries,
    spec: ClosureSpec,
    scales: FlowScales,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    scheme: GradientScheme = GradientScheme.CENTRAL,
) -> ClosureStats:
    """Return avg(nu_turb), avg(l), U'_model, I_model and avg(nu_turb)/(L U)."""
    if not scales.U > 0.0 or not scales.L:
        raise UndefinedScaleError("closure statistics need positive U and L")
    L, U = scales.L, scales.U
    volume = series.grid.volume
    cell = series.grid.cell_volume

    nu_means, l_means, k_means = [], [], []
    factored = True
    for snapshot in series:
        fields = resolve_closure(spec, snapshot, scheme)
        nu_means.append(float(np.sum(np.abs(fields.nu_turb.values))) * cell / volume)
        if fields.mixing_length is not None and fields.kprime is not None:
            l_sq = np.square(fields.mixing_length.values)
            l_means.append(float(np.sum(l_sq)) * cell / volume)
            k_means.append(float(np.sum(2.0 * fields.kprime.values)) * cell / volume)
        else:
            factored = False

    times = series.times
    avg_nu = avg_inf(
        TimeSeries(times, np.array(nu_means), "nu_turb mean"), tail_fraction
    ).value
    ratio_nu = avg_nu / (L * U)
    if not factored:
        _LOGGER.debug(
            "Closure %s is unfactored, skipping l and k' statistics", spec.kind
        )
        return ClosureStats(mu=spec.mu, avg_nu_turb=avg_nu, ratio_nu=ratio_nu)

    avg_l = math.sqrt(
        avg_inf(TimeSeries(times, np.array(l_means), "l mean"), tail_fraction).value
    )
    U_prime_model = math.sqrt(
        avg_inf(TimeSeries(times, np.array(k_means), "2k' mean"), tail_fraction).value
    )
    return ClosureStats(
        mu=spec.mu,
        avg_nu_turb=avg_nu,
        ratio_nu=ratio_nu,
        avg_l=avg_l,
        U_prime_model=U_prime_model,
        I_model=(U_prime_model / U) ** 2,
        avg_l_over_L=avg_l / L,
        U_prime_model_over_U_prime=(
            U_prime_model / scales.U_prime if scales.U_prime > 0.0 else None
        ),
    )
