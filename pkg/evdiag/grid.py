"""Uniform-grid fields, discrete differential operators and L2 quadrature.

Arrays are stored with the spatial axes last and in ``(x, y, z)`` order, so a
field of rank ``r`` on a grid of shape ``(nx, ny, nz)`` has values of shape
``(ndim,) * r + (nx, ny, nz)``. Two dimensional grids carry ``nz == 1``.
Tensor component ``[i, j]`` of a gradient is ``d v_i / d x_j``.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import StrEnum
import logging
import math

import numpy as np
from numpy.typing import NDArray

from .const import UNIFORM_DT_RTOL
from .exceptions import ValidationError

_LOGGER = logging.getLogger(__name__)

type FloatArray = NDArray[np.float64]


class GradientScheme(StrEnum):
    """Discrete differentiation scheme."""

    CENTRAL = "central"
    SPECTRAL = "spectral"


@dataclass(frozen=True)
class Grid:
    """Uniform structured grid with per-axis periodicity."""

    ndim: int
    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    periodic: tuple[bool, bool, bool] = (True, True, True)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        """Validate the grid geometry."""
        if self.ndim not in (2, 3):
            raise ValidationError(f"ndim must be 2 or 3, got {self.ndim}")
        if len(self.shape) != 3 or len(self.spacing) != 3 or len(self.periodic) != 3:
            raise ValidationError("shape, spacing and periodic need three entries")
        if self.ndim == 2 and self.shape[2] != 1:
            raise ValidationError(f"nz must be 1 for a 2D grid, got {self.shape[2]}")
        if any(n < 4 for n in self.shape[: self.ndim]):
            raise ValidationError(f"every axis needs at least 4 points: {self.shape}")
        if not all(math.isfinite(d) and d > 0 for d in self.spacing):
            raise ValidationError(f"spacings must be positive: {self.spacing}")

    @classmethod
    def periodic_box(
        cls, n: int, ndim: int = 2, length: float = 2.0 * math.pi
    ) -> Grid:
        """Return the periodic box [0, length]^ndim with n points per axis."""
        d = length / n
        if ndim == 2:
            return cls(2, (n, n, 1), (d, d, 1.0))
        return cls(3, (n, n, n), (d, d, d))

    @property
    def axes(self) -> range:
        """Return the active spatial axes."""
        return range(self.ndim)

    @property
    def h(self) -> float:
        """Return the typical mesh width, the largest active spacing."""
        return max(self.spacing[: self.ndim])

    @property
    def cell_volume(self) -> float:
        """Return the volume of one grid cell."""
        return math.prod(self.spacing[: self.ndim])

    @property
    def volume(self) -> float:
        """Return |Omega|."""
        return math.prod(
            n * d for n, d in zip(self.shape[: self.ndim], self.spacing[: self.ndim])
        )

    @property
    def fully_periodic(self) -> bool:
        """Return True when every active axis is periodic."""
        return all(self.periodic[: self.ndim])

    def coordinates(self) -> tuple[FloatArray, ...]:
        """Return the cell coordinates of the active axes, indexing="ij"."""
        lines = [
            self.origin[a] + np.arange(self.shape[a]) * self.spacing[a]
            for a in range(3)
        ]
        return tuple(np.meshgrid(*lines, indexing="ij"))[: self.ndim]


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar, vector or tensor values on a grid at one instant."""

    grid: Grid
    values: FloatArray
    rank: int = 0
    time: float = 0.0
    name: str = "field"

    def __post_init__(self) -> None:
        """Coerce and validate the values."""
        values = np.asarray(self.values, dtype=np.float64)
        if self.rank not in (0, 1, 2):
            raise ValidationError(f"{self.name}: rank must be 0, 1 or 2")
        expected = (self.grid.ndim,) * self.rank + self.grid.shape
        if values.shape != expected:
            raise ValidationError(
                f"{self.name}: expected shape {expected}, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"{self.name}: non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def scalar(
        cls, grid: Grid, values: FloatArray, time: float = 0.0, name: str = "scalar"
    ) -> Field:
        """Build a scalar field, accepting values of the active-axes shape."""
        return cls(grid, np.reshape(values, grid.shape), 0, time, name)

    @classmethod
    def vector(
        cls,
        grid: Grid,
        components: Sequence[FloatArray],
        time: float = 0.0,
        name: str = "vector",
    ) -> Field:
        """Build a vector field from one array per component."""
        stacked = np.stack([np.reshape(c, grid.shape) for c in components])
        return cls(grid, stacked, 1, time, name)

    @property
    def component_axes(self) -> tuple[int, ...]:
        """Return the leading axes that index tensor components."""
        return tuple(range(self.rank))

    def magnitude_sq(self) -> FloatArray:
        """Return the per-cell squared Frobenius magnitude."""
        if self.rank == 0:
            return np.square(self.values)
        return np.sum(np.square(self.values), axis=self.component_axes)

    def magnitude(self) -> FloatArray:
        """Return the per-cell Frobenius magnitude."""
        return np.sqrt(self.magnitude_sq())

    def scaled(self, factor: float) -> Field:
        """Return the field multiplied by a constant."""
        return Field(self.grid, factor * self.values, self.rank, self.time, self.name)


def _derivative(
    values: FloatArray, grid: Grid, axis: int, scheme: GradientScheme
) -> FloatArray:
    """Differentiate along one spatial axis of an array with trailing grid axes."""
    array_axis = values.ndim - 3 + axis
    d = grid.spacing[axis]
    if scheme is GradientScheme.SPECTRAL:
        n = grid.shape[axis]
        k = 2.0 * np.pi * np.fft.rfftfreq(n, d)
        if n % 2 == 0:
            k[-1] = 0.0
        shape = [1] * values.ndim
        shape[array_axis] = k.size
        spectrum = np.fft.rfft(values, axis=array_axis)
        return np.fft.irfft(1j * k.reshape(shape) * spectrum, n=n, axis=array_axis)
    if grid.periodic[axis]:
        return (
            np.roll(values, -1, axis=array_axis) - np.roll(values, 1, axis=array_axis)
        ) / (2.0 * d)
    return np.gradient(values, d, axis=array_axis, edge_order=2)


def _check_scheme(grid: Grid, scheme: GradientScheme) -> GradientScheme:
    scheme = GradientScheme(scheme)
    if scheme is GradientScheme.SPECTRAL and not grid.fully_periodic:
        raise ValidationError("spectral differentiation needs a fully periodic grid")
    return scheme


def gradient(v: Field, scheme: GradientScheme = GradientScheme.CENTRAL) -> Field:
    """Return the gradient of a scalar or vector field.

    Central differences are second order; non-periodic axes use second order
    one-sided stencils at the boundaries.
    """
    if v.rank > 1:
        raise ValidationError(f"{v.name}: gradient needs rank 0 or 1, got {v.rank}")
    scheme = _check_scheme(v.grid, scheme)
    parts = [_derivative(v.values, v.grid, a, scheme) for a in v.grid.axes]
    return Field(
        v.grid, np.stack(parts, axis=v.rank), v.rank + 1, v.time, f"grad {v.name}"
    )


def sym_gradient(v: Field, scheme: GradientScheme = GradientScheme.CENTRAL) -> Field:
    """Return the symmetric part of the velocity gradient."""
    if v.rank != 1:
        raise ValidationError(f"{v.name}: symmetric gradient needs a vector field")
    g = gradient(v, scheme).values
    sym = 0.5 * (g + np.swapaxes(g, 0, 1))
    return Field(v.grid, sym, 2, v.time, f"sym grad {v.name}")


def divergence(v: Field, scheme: GradientScheme = GradientScheme.CENTRAL) -> Field:
    """Return the divergence of a vector field, or the row divergence of a tensor."""
    if v.rank == 1:
        g = gradient(v, scheme).values
        return Field(
            v.grid, np.trace(g, axis1=0, axis2=1), 0, v.time, f"div {v.name}"
        )
    if v.rank != 2:
        raise ValidationError(f"{v.name}: divergence needs rank 1 or 2")
    scheme = _check_scheme(v.grid, scheme)
    rows = [
        sum(_derivative(v.values[i, j], v.grid, j, scheme) for j in v.grid.axes)
        for i in v.grid.axes
    ]
    return Field(v.grid, np.stack(rows), 1, v.time, f"div {v.name}")


def l2_norm_sq(v: Field) -> float:
    """Return the midpoint quadrature of the integral of |v|^2 over the grid."""
    return float(np.sum(np.square(v.values)) * v.grid.cell_volume)


def inner_product(a: Field, b: Field) -> float:
    """Return the L2 inner product of two fields of equal rank on one grid."""
    if a.grid != b.grid:
        raise ValidationError(f"{a.name} and {b.name} live on different grids")
    if a.rank != b.rank:
        raise ValidationError(f"rank mismatch: {a.rank} vs {b.rank}")
    return float(np.sum(a.values * b.values) * a.grid.cell_volume)


def solenoidal_defect(
    v: Field, scheme: GradientScheme = GradientScheme.CENTRAL
) -> float:
    """Return ||div v|| / ||grad v||, zero for fields without gradient."""
    grad_norm = math.sqrt(l2_norm_sq(gradient(v, scheme)))
    if grad_norm == 0.0:
        return 0.0
    return math.sqrt(l2_norm_sq(divergence(v, scheme))) / grad_norm


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Velocity at one instant plus optional closure and forcing fields."""

    velocity: Field
    nu_turb: Field | None = None
    mixing_length: Field | None = None
    kprime: Field | None = None
    forcing: Field | None = None

    def __post_init__(self) -> None:
        """Check ranks and grids of the attached fields."""
        if self.velocity.rank != 1:
            raise ValidationError("velocity must be a vector field")
        for item, rank in (
            (self.nu_turb, 0),
            (self.mixing_length, 0),
            (self.kprime, 0),
            (self.forcing, 1),
        ):
            if item is None:
                continue
            if item.rank != rank:
                raise ValidationError(f"{item.name}: expected rank {rank}")
            if item.grid != self.velocity.grid:
                raise ValidationError(f"{item.name}: grid differs from velocity")

    @property
    def time(self) -> float:
        """Return the snapshot time."""
        return self.velocity.time

    @property
    def grid(self) -> Grid:
        """Return the snapshot grid."""
        return self.velocity.grid


@dataclass(frozen=True, eq=False)
class SnapshotSeries:
    """Time-ordered snapshots on one grid with a uniform time step."""

    snapshots: tuple[Snapshot, ...]

    def __post_init__(self) -> None:
        """Validate grid sharing and time uniformity."""
        snapshots = tuple(self.snapshots)
        object.__setattr__(self, "snapshots", snapshots)
        if len(snapshots) < 2:
            raise ValidationError("a series needs at least two snapshots")
        grid = snapshots[0].grid
        if any(s.grid != grid for s in snapshots[1:]):
            raise ValidationError("all snapshots must share one grid")
        steps = np.diff(self.times)
        if np.any(steps <= 0):
            raise ValidationError("snapshot times must increase")
        mean_step = float(np.mean(steps))
        if np.max(np.abs(steps - mean_step)) > UNIFORM_DT_RTOL * mean_step:
            raise ValidationError("snapshot times are not uniformly spaced")

    @classmethod
    def from_velocities(cls, velocities: Sequence[Field]) -> SnapshotSeries:
        """Build a series of bare velocity snapshots."""
        return cls(tuple(Snapshot(v) for v in velocities))

    def __len__(self) -> int:
        """Return the number of snapshots."""
        return len(self.snapshots)

    def __iter__(self) -> Iterator[Snapshot]:
        """Iterate over snapshots in time order."""
        return iter(self.snapshots)

    def __getitem__(self, index: int) -> Snapshot:
        """Return one snapshot."""
        return self.snapshots[index]

    @property
    def grid(self) -> Grid:
        """Return the shared grid."""
        return self.snapshots[0].grid

    @property
    def times(self) -> FloatArray:
        """Return the snapshot times."""
        return np.array([s.time for s in self.snapshots])

    @property
    def dt(self) -> float:
        """Return the uniform time step."""
        times = self.times
        return float((times[-1] - times[0]) / (len(times) - 1))

    @property
    def forcing(self) -> Field | None:
        """Return the body force carried by the series, if any."""
        for snapshot in self.snapshots:
            if snapshot.forcing is not None:
                return snapshot.forcing
        return None
