"""Parsing and validation of solver configs and analysis manifests.

Both files use flat ``key = value`` lines with dotted section prefixes, ``#``
comments, comma separated lists and ``true``/``false`` booleans.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, replace
import logging
from pathlib import Path
from typing import Any

import voluptuous as vol

from .closures import ClosureKind, ClosureSpec
from .const import (
    CONF_BETA,
    CONF_C_E,
    CONF_CLOSURE_CS,
    CONF_CLOSURE_KIND,
    CONF_CLOSURE_MU,
    CONF_CLOSURE_NU_T,
    CONF_FLAG_THRESHOLD,
    CONF_FORCING_AMPLITUDE,
    CONF_FORCING_KIND,
    CONF_FORCING_WAVENUMBER,
    CONF_GRADIENT_SCHEME,
    CONF_GRID_PERIODIC,
    CONF_INITIAL_KIND,
    CONF_INITIAL_PERTURBATION,
    CONF_NU,
    CONF_SNAPSHOT,
    CONF_SOLVER_CFL,
    CONF_SOLVER_DEALIAS,
    CONF_SOLVER_N,
    CONF_SOLVER_NU,
    CONF_SOLVER_SEED,
    CONF_SOLVER_SNAPSHOT_EVERY,
    CONF_SOLVER_T_END,
    CONF_TAIL_FRACTION,
    DEFAULT_BETAS,
    DEFAULT_C_E,
    DEFAULT_CFL,
    DEFAULT_FLAG_THRESHOLD,
    DEFAULT_SMAGORINSKY_CS,
    DEFAULT_TAIL_FRACTION,
    MIN_GRID_POINTS,
)
from .exceptions import ConfigError, EVDiagError
from .grid import GradientScheme
from .models import AnalysisOptions
from .solver import ForcingKind, ForcingSpec, InitialKind, SolverConfig

_LOGGER = logging.getLogger(__name__)

SNAPSHOT_KEY = rf"^{CONF_SNAPSHOT}\.(\d+)$"


def boolean(value: Any) -> bool:
    """Coerce true/false text to bool."""
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text == "true":
        return True
    if text == "false":
        return False
    raise vol.Invalid(f"expected true or false, got {value!r}")


def _listed(item: Any) -> Any:
    def validator(value: Any) -> tuple[Any, ...]:
        parts = value if isinstance(value, (list, tuple)) else str(value).split(",")
        return tuple(item(p.strip() if isinstance(p, str) else p) for p in parts)

    return validator


def _positive_float() -> Any:
    return vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))


def _nonnegative_float() -> Any:
    return vol.All(vol.Coerce(float), vol.Range(min=0))


def _beta(value: Any) -> float:
    beta = float(value)
    if not 0.0 < beta < 1.0:
        raise vol.Invalid(f"beta must lie in (0, 1), got {beta}")
    return beta


CLOSURE_SCHEMA = {
    vol.Optional(CONF_CLOSURE_KIND, default=ClosureKind.CONSTANT_NU.value): vol.In(
        [kind.value for kind in ClosureKind]
    ),
    vol.Optional(CONF_CLOSURE_MU, default=1.0): _nonnegative_float(),
    vol.Optional(CONF_CLOSURE_CS, default=DEFAULT_SMAGORINSKY_CS): _nonnegative_float(),
    vol.Optional(CONF_CLOSURE_NU_T, default=0.0): _nonnegative_float(),
}

SOLVER_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_SOLVER_N): vol.All(
            vol.Coerce(int), vol.Range(min=MIN_GRID_POINTS)
        ),
        vol.Required(CONF_SOLVER_NU): _positive_float(),
        vol.Required(CONF_SOLVER_T_END): _positive_float(),
        vol.Optional(CONF_SOLVER_CFL, default=DEFAULT_CFL): vol.All(
            vol.Coerce(float),
            vol.Range(min=0, max=1, min_included=False, max_included=False),
        ),
        vol.Optional(CONF_SOLVER_DEALIAS, default=True): boolean,
        vol.Optional(CONF_SOLVER_SNAPSHOT_EVERY, default=1): vol.All(
            vol.Coerce(int), vol.Range(min=1)
        ),
        vol.Optional(CONF_SOLVER_SEED, default=0): vol.Coerce(int),
        vol.Optional(CONF_FORCING_KIND, default=ForcingKind.NONE.value): vol.In(
            [kind.value for kind in ForcingKind]
        ),
        vol.Optional(CONF_FORCING_AMPLITUDE, default=1.0): vol.Coerce(float),
        vol.Optional(CONF_FORCING_WAVENUMBER, default=4): vol.All(
            vol.Coerce(int), vol.Range(min=1)
        ),
        vol.Optional(CONF_INITIAL_KIND, default=InitialKind.TAYLOR_GREEN.value): vol.In(
            [kind.value for kind in InitialKind]
        ),
        vol.Optional(CONF_INITIAL_PERTURBATION): _nonnegative_float(),
        **CLOSURE_SCHEMA,
    }
)

MANIFEST_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_NU): _positive_float(),
        vol.Optional(CONF_GRID_PERIODIC, default=(True, True, True)): vol.All(
            _listed(boolean), vol.Length(min=3, max=3)
        ),
        vol.Optional(CONF_BETA, default=DEFAULT_BETAS): vol.All(
            _listed(_beta), vol.Length(min=1)
        ),
        vol.Optional(
            CONF_FLAG_THRESHOLD, default=DEFAULT_FLAG_THRESHOLD
        ): _positive_float(),
        vol.Optional(CONF_TAIL_FRACTION, default=DEFAULT_TAIL_FRACTION): vol.All(
            vol.Coerce(float), vol.Range(min=0, max=1, min_included=False)
        ),
        vol.Optional(
            CONF_GRADIENT_SCHEME, default=GradientScheme.CENTRAL.value
        ): vol.In([scheme.value for scheme in GradientScheme]),
        vol.Optional(CONF_C_E, default=DEFAULT_C_E): _positive_float(),
        vol.Match(SNAPSHOT_KEY): str,
        **CLOSURE_SCHEMA,
    }
)


@dataclass(frozen=True)
class Manifest:
    """Snapshot files of one record plus the settings of its analysis."""

    snapshots: tuple[Path, ...]
    nu: float
    closure: ClosureSpec
    periodic: tuple[bool, bool, bool] = (True, True, True)
    betas: tuple[float, ...] = DEFAULT_BETAS
    flag_threshold: float = DEFAULT_FLAG_THRESHOLD
    tail_fraction: float = DEFAULT_TAIL_FRACTION
    gradient_scheme: GradientScheme = GradientScheme.CENTRAL
    c_e: float = DEFAULT_C_E

    def options(self) -> AnalysisOptions:
        """Return the analysis options of the manifest."""
        return AnalysisOptions(
            nu=self.nu,
            closure=self.closure,
            betas=self.betas,
            flag_threshold=self.flag_threshold,
            tail_fraction=self.tail_fraction,
            gradient_scheme=self.gradient_scheme,
            c_e=self.c_e,
        )

    def with_overrides(
        self,
        betas: tuple[float, ...] | None = None,
        flag_threshold: float | None = None,
    ) -> Manifest:
        """Return the manifest with command line overrides applied."""
        manifest = self
        if betas is not None:
            manifest = replace(manifest, betas=betas)
        if flag_threshold is not None:
            manifest = replace(manifest, flag_threshold=flag_threshold)
        return manifest


def parse_config_text(text: str) -> dict[str, str]:
    """Split key = value lines into a dict, dropping comments and blank lines."""
    data: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {number}: expected 'key = value'")
        if key in data:
            raise ConfigError(f"line {number}: duplicate key", key)
        data[key] = value.strip()
    return data


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(item) for item in value)
    return str(value)


def format_config(data: Mapping[str, object]) -> str:
    """Return key = value text that parse_config_text reads back."""
    return "".join(f"{key} = {_format_value(value)}\n" for key, value in data.items())


def validate_input(schema: vol.Schema, data: Mapping[str, Any]) -> dict[str, Any]:
    """Validate parsed config data, translating voluptuous errors."""
    try:
        validated: dict[str, Any] = schema(dict(data))
    except vol.MultipleInvalid as err:
        key = ".".join(str(part) for part in err.path) or None
        raise ConfigError(err.msg, key) from err
    except vol.Invalid as err:
        raise ConfigError(str(err)) from err
    return validated


def _closure(data: Mapping[str, Any]) -> ClosureSpec:
    return ClosureSpec(
        kind=ClosureKind(data[CONF_CLOSURE_KIND]),
        mu=data[CONF_CLOSURE_MU],
        cs=data[CONF_CLOSURE_CS],
        nu_t=data[CONF_CLOSURE_NU_T],
    )


def solver_config_from_data(data: Mapping[str, Any]) -> SolverConfig:
    """Build a solver config from parsed key = value data."""
    valid = validate_input(SOLVER_SCHEMA, data)
    try:
        return SolverConfig(
            n=valid[CONF_SOLVER_N],
            nu=valid[CONF_SOLVER_NU],
            t_end=valid[CONF_SOLVER_T_END],
            closure=_closure(valid),
            forcing=ForcingSpec(
                kind=ForcingKind(valid[CONF_FORCING_KIND]),
                amplitude=valid[CONF_FORCING_AMPLITUDE],
                wavenumber=valid[CONF_FORCING_WAVENUMBER],
            ),
            cfl=valid[CONF_SOLVER_CFL],
            dealias=valid[CONF_SOLVER_DEALIAS],
            snapshot_every=valid[CONF_SOLVER_SNAPSHOT_EVERY],
            seed=valid[CONF_SOLVER_SEED],
            initial=InitialKind(valid[CONF_INITIAL_KIND]),
            perturbation=valid.get(CONF_INITIAL_PERTURBATION),
        )
    except EVDiagError as err:
        raise ConfigError(str(err)) from err


def manifest_from_data(data: Mapping[str, Any], base_dir: Path) -> Manifest:
    """Build a manifest from parsed data, resolving snapshot paths against base_dir."""
    valid = validate_input(MANIFEST_SCHEMA, data)
    indexed = sorted(
        (int(key.rsplit(".", 1)[1]), value)
        for key, value in valid.items()
        if key.startswith(f"{CONF_SNAPSHOT}.")
    )
    if len(indexed) < 2:
        raise ConfigError("a manifest needs at least two snapshots", CONF_SNAPSHOT)
    periodic = valid[CONF_GRID_PERIODIC]
    try:
        closure = _closure(valid)
    except EVDiagError as err:
        raise ConfigError(str(err)) from err
    return Manifest(
        snapshots=tuple(base_dir / path for _, path in indexed),
        nu=valid[CONF_NU],
        closure=closure,
        periodic=(periodic[0], periodic[1], periodic[2]),
        betas=tuple(valid[CONF_BETA]),
        flag_threshold=valid[CONF_FLAG_THRESHOLD],
        tail_fraction=valid[CONF_TAIL_FRACTION],
        gradient_scheme=GradientScheme(valid[CONF_GRADIENT_SCHEME]),
        c_e=valid[CONF_C_E],
    )


def manifest_to_data(manifest: Manifest, base_dir: Path) -> dict[str, object]:
    """Return the key = value data of a manifest.

    Snapshot paths are written relative to base_dir when they lie below it.
    """
    data: dict[str, object] = {
        CONF_NU: manifest.nu,
        CONF_CLOSURE_KIND: manifest.closure.kind.value,
        CONF_CLOSURE_MU: manifest.closure.mu,
        CONF_CLOSURE_CS: manifest.closure.cs,
        CONF_CLOSURE_NU_T: manifest.closure.nu_t,
        CONF_GRID_PERIODIC: manifest.periodic,
        CONF_BETA: manifest.betas,
        CONF_FLAG_THRESHOLD: manifest.flag_threshold,
        CONF_TAIL_FRACTION: manifest.tail_fraction,
        CONF_GRADIENT_SCHEME: manifest.gradient_scheme.value,
        CONF_C_E: manifest.c_e,
    }
    for index, path in enumerate(manifest.snapshots):
        data[f"{CONF_SNAPSHOT}.{index}"] = (
            path.relative_to(base_dir) if path.is_relative_to(base_dir) else path
        ).as_posix()
    return data


def load_solver_config(path: Path) -> SolverConfig:
    """Read and validate a solver config file."""
    _LOGGER.debug("Loading solver config %s", path)
    return solver_config_from_data(parse_config_text(path.read_text(encoding="utf-8")))


def load_manifest(path: Path) -> Manifest:
    """Read and validate a manifest file."""
    _LOGGER.debug("Loading manifest %s", path)
    return manifest_from_data(
        parse_config_text(path.read_text(encoding="utf-8")), path.parent
    )
