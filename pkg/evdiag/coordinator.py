"""Coordinator that runs every diagnostic over a snapshot series."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import replace
import hashlib
import logging

from .closures import ClosureStats, closure_stats
from .diagnostics import (
    DissipationSeries,
    assemble_report,
    dissipation_series,
    energy_residual,
    evaluate_bounds,
    force_balance_residual,
    measure_inverse_constant,
    resolution_verdict,
    taylor_microscale,
    work_bound,
)
from .exceptions import ClosureInputError, UndefinedScaleError, ValidationError
from .grid import SnapshotSeries
from .models import (
    AnalysisOptions,
    BoundEvaluation,
    DiagnosticsReport,
    ResolutionVerdict,
    WorkBound,
)
from .scales import FlowScales, flow_scales

_LOGGER = logging.getLogger(__name__)

# Errors that make one report section unavailable without failing the analysis
SECTION_ERRORS = (UndefinedScaleError, ClosureInputError, ValidationError)


def series_digest(series: SnapshotSeries) -> str:
    """Return a sha256 digest of the snapshot times and arrays."""
    digest = hashlib.sha256()
    digest.update(series.times.tobytes())
    for snapshot in series:
        for item in (
            snapshot.velocity,
            snapshot.nu_turb,
            snapshot.mixing_length,
            snapshot.kprime,
            snapshot.forcing,
        ):
            digest.update(b"\x00" if item is None else item.values.tobytes())
    return digest.hexdigest()


class DiagnosticsCoordinator:
    """Compute the scales, statistics, bounds and verdicts of one record."""

    def __init__(self, series: SnapshotSeries, options: AnalysisOptions) -> None:
        """Initialize the coordinator."""
        self.series = series
        self.options = options
        self._warnings: list[str] = []
        self._dissipation: DissipationSeries | None = None
        self.report: DiagnosticsReport | None = None

    def _section[T](self, name: str, compute: Callable[[], T]) -> T | None:
        """Run one report section, recording it as unavailable on a section error."""
        try:
            return compute()
        except SECTION_ERRORS as err:
            _LOGGER.warning("%s unavailable: %s", name, err)
            self._warnings.append(f"{name} unavailable: {err}")
            return None

    def _inputs(self) -> dict[str, object]:
        options = self.options
        grid = self.series.grid
        return {
            "nu": options.nu,
            "closure": {
                "kind": str(options.closure.kind),
                "mu": options.closure.mu,
                "cs": options.closure.cs,
                "nu_t": options.closure.nu_t,
            },
            "grid": {
                "ndim": grid.ndim,
                "shape": list(grid.shape),
                "spacing": list(grid.spacing),
                "periodic": list(grid.periodic),
            },
            "snapshots": len(self.series),
            "t_start": float(self.series.times[0]),
            "t_end": float(self.series.times[-1]),
            "betas": list(options.betas),
            "flag_threshold": options.flag_threshold,
            "tail_fraction": options.tail_fraction,
            "gradient_scheme": str(options.gradient_scheme),
            "c_e": options.c_e,
        }

    def _resolution(self, scales: FlowScales, C_I: float) -> ResolutionVerdict:
        scheme = self.options.gradient_scheme
        return resolution_verdict(
            self.series,
            scales,
            C_I,
            self.options.c_e,
            self.options.tail_fraction,
            scheme,
        )

    def _bounds(
        self, scales: FlowScales, stats: ClosureStats | None
    ) -> tuple[BoundEvaluation, ...]:
        assert self._dissipation is not None
        return evaluate_bounds(
            self._dissipation,
            scales,
            stats,
            self.options.betas,
            self.options.tail_fraction,
        )

    def _work_bound(self, scales: FlowScales) -> WorkBound:
        assert self._dissipation is not None
        if scales.F == 0.0:
            raise UndefinedScaleError("the work bound needs a nonzero force")
        return work_bound(self.series, self._dissipation, scales.F)

    def refresh(self) -> DiagnosticsReport:
        """Compute every section and assemble the report."""
        options = self.options
        series = self.series
        scheme = options.gradient_scheme
        tail = options.tail_fraction
        self._warnings = []
        _LOGGER.debug(
            "Analyzing %d snapshots on grid %s", len(series), series.grid.shape
        )

        scales = flow_scales(series, options.nu, None, tail, scheme)
        if scales.L is None:
            self._warnings.append(
                "no forcing in the record: L, Re and F-based bounds unavailable"
            )
        if not scales.forcing_is_solenoidal:
            self._warnings.append(
                "forcing is not solenoidal: "
                f"||div f||/||grad f|| = {scales.forcing_defect:.6g}"
            )

        stats = self._section(
            "closure statistics",
            lambda: closure_stats(series, options.closure, scales, tail, scheme),
        )
        if stats is not None:
            scales = replace(
                scales, U_prime_model=stats.U_prime_model, I_model=stats.I_model
            )
        self._dissipation = self._section(
            "dissipation",
            lambda: dissipation_series(series, options.nu, options.closure, scheme),
        )
        residual = self._section(
            "energy residual",
            lambda: energy_residual(series, options.nu, options.closure, None, scheme),
        )
        balance = self._section(
            "force balance",
            lambda: force_balance_residual(
                series, options.nu, options.closure, None, scheme
            ),
        )

        work = None
        bounds: tuple[BoundEvaluation, ...] = ()
        if self._dissipation is not None:
            work = self._section("work bound", lambda: self._work_bound(scales))
            bounds = (
                self._section("dissipation bound", lambda: self._bounds(scales, stats))
                or ()
            )

        lambda_T = self._section(
            "taylor microscale", lambda: taylor_microscale(series, tail, scheme)
        )
        C_I = self._section(
            "inverse constant", lambda: measure_inverse_constant(series, scheme)
        )
        resolution = None
        if lambda_T is not None and C_I is not None:
            resolution = self._section(
                "resolution verdict", lambda: self._resolution(scales, C_I)
            )

        self.report = assemble_report(
            provenance=series_digest(series),
            inputs=self._inputs(),
            scales=scales,
            stats=stats,
            dissipation=(
                self._dissipation.summary(tail)
                if self._dissipation is not None
                else None
            ),
            energy_residual_value=residual,
            force_balance_value=balance,
            work=work,
            lambda_T=lambda_T,
            C_I=C_I,
            resolution=resolution,
            bounds=bounds,
            warnings=self._warnings,
            flag_threshold=options.flag_threshold,
        )
        _LOGGER.info(
            "Analysis finished: resolution %s, dissipation %s",
            self.report.verdicts.resolution,
            self.report.verdicts.dissipation,
        )
        return self.report
