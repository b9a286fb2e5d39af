"""Finite and long-time averages of sampled time series."""

from __future__ import annotations

from dataclasses import dataclass
import logging
import math

import numpy as np

from .const import DEFAULT_TAIL_FRACTION, HORIZON_ALIGN_RTOL, UNIFORM_DT_RTOL
from .exceptions import RangeError, ValidationError
from .grid import FloatArray

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Scalar samples on a uniform time grid."""

    times: FloatArray
    values: FloatArray
    name: str = "series"

    def __post_init__(self) -> None:
        """Validate sampling and finiteness."""
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValidationError(
                f"{self.name}: times and values must be 1D of equal length"
            )
        if times.size < 2:
            raise ValidationError(f"{self.name}: at least two samples are needed")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValidationError(f"{self.name}: non-finite samples")
        steps = np.diff(times)
        mean_step = float(np.mean(steps))
        spread = float(np.max(np.abs(steps - mean_step)))
        if mean_step <= 0 or spread > UNIFORM_DT_RTOL * mean_step:
            raise ValidationError(
                f"{self.name}: time grid is not uniform and increasing"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dt(self) -> float:
        """Return the sampling step."""
        return float((self.times[-1] - self.times[0]) / (self.times.size - 1))

    @property
    def duration(self) -> float:
        """Return the length of the record."""
        return float(self.times[-1] - self.times[0])

    def map(self, values: FloatArray, name: str | None = None) -> TimeSeries:
        """Return a series with the same times and new values."""
        return TimeSeries(self.times, values, name or self.name)


@dataclass(frozen=True)
class LongTimeAverage:
    """Finite-record surrogate of the limit superior of running averages."""

    value: float
    final: float
    window_start: float


def running_average(s: TimeSeries) -> FloatArray:
    """Return <phi>_T for T = dt, 2 dt, ..., duration (trapezoidal rule)."""
    if np.all(s.values == s.values[0]):
        return np.full(s.values.size - 1, s.values[0])
    midpoints = 0.5 * (s.values[:-1] + s.values[1:])
    return np.cumsum(midpoints) / np.arange(1, s.values.size)


def _horizon_index(s: TimeSeries, T: float) -> int:
    """Return the number of sample intervals covered by the horizon T."""
    dt = s.dt
    if not T > 0:
        raise RangeError(f"averaging horizon must be positive, got {T}")
    if T > s.duration + HORIZON_ALIGN_RTOL * dt:
        raise RangeError(f"averaging horizon {T} exceeds the record {s.duration}")
    nearest = round(T / dt)
    if abs(nearest * dt - T) <= HORIZON_ALIGN_RTOL * dt:
        n = nearest
    else:
        n = math.floor(T / dt)
        _LOGGER.warning(
            "Horizon %s is not on the sample grid, using %s", T, n * dt
        )
    if n < 1:
        raise RangeError(f"averaging horizon {T} is shorter than one sample step")
    return min(n, s.values.size - 1)


def avg_T(s: TimeSeries, T: float) -> float:
    """Return the finite time average over [t0, t0 + T]."""
    return float(running_average(s)[_horizon_index(s, T) - 1])


def effective_horizon(s: TimeSeries, T: float) -> float:
    """Return the horizon actually used by avg_T."""
    return _horizon_index(s, T) * s.dt


def avg_inf(
    s: TimeSeries, tail_fraction: float = DEFAULT_TAIL_FRACTION
) -> LongTimeAverage:
    """Return the tail-window supremum of running averages and the final average."""
    if not 0.0 < tail_fraction <= 1.0:
        raise RangeError(f"tail fraction must lie in (0, 1], got {tail_fraction}")
    averages = running_average(s)
    intervals = averages.size
    start = max(1, math.ceil((1.0 - tail_fraction) * intervals))
    return LongTimeAverage(
        value=float(np.max(averages[start - 1 :])),
        final=float(averages[-1]),
        window_start=float(s.times[start] - s.times[0]),
    )


def _check_pair(a: TimeSeries, b: TimeSeries) -> None:
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise ValidationError(f"{a.name} and {b.name} have different time grids")


def cs_in_time(a: TimeSeries, b: TimeSeries, T: float) -> tuple[float, float]:
    """Return both sides of <ab>_T <= <a^2>_T^(1/2) <b^2>_T^(1/2)."""
    _check_pair(a, b)
    lhs = avg_T(a.map(a.values * b.values), T)
    rhs = math.sqrt(avg_T(a.map(np.square(a.values)), T)) * math.sqrt(
        avg_T(b.map(np.square(b.values)), T)
    )
    return lhs, rhs


def cs_in_time_inf(
    a: TimeSeries, b: TimeSeries, tail_fraction: float = DEFAULT_TAIL_FRACTION
) -> tuple[float, float]:
    """Return both sides of the Cauchy-Schwarz inequality for long-time averages."""
    _check_pair(a, b)
    lhs = avg_inf(a.map(a.values * b.values), tail_fraction).value
    a_sq = avg_inf(a.map(np.square(a.values)), tail_fraction).value
    b_sq = avg_inf(b.map(np.square(b.values)), tail_fraction).value
    rhs = math.sqrt(a_sq) * math.sqrt(b_sq)
    return lhs, rhs


def cs_holds(lhs: float, rhs: float) -> bool:
    """Return True when lhs <= rhs up to rounding."""
    return lhs <= rhs + 1e-12 * (1.0 + abs(rhs))
