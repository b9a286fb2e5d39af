"""Command line interface: simulate, taylor-green, analyze and verify."""

from __future__ import annotations

import argparse
from collections.abc import Sequence
from functools import cache
from importlib import resources
import json
import logging
from pathlib import Path
import sys

from .closures import NO_MODEL
from .config import Manifest, load_solver_config
from .const import PACKAGE
from .coordinator import DiagnosticsCoordinator
from .diagnostics import invariant_suite
from .exceptions import (
    ClosureInputError,
    ConfigError,
    EVDiagError,
    RangeError,
    SnapshotFormatError,
    SnapshotLengthError,
    SolverError,
    UndefinedScaleError,
    ValidationError,
)
from .grid import GradientScheme
from .solver import SolverConfig, run
from .storage import (
    SnapshotWriter,
    dump_dissipation_fields,
    load_series,
    read_manifest,
    write_report,
)

_LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FLAGGED = 1
EXIT_INPUT_ERROR = 2

# Most specific first
ERROR_KEYS: tuple[tuple[type[BaseException], str], ...] = (
    (ConfigError, "invalid_config"),
    (SnapshotFormatError, "snapshot_format"),
    (SnapshotLengthError, "snapshot_length"),
    (UndefinedScaleError, "undefined_scale"),
    (ClosureInputError, "closure_input"),
    (SolverError, "solver_failed"),
    (ValidationError, "invalid_input"),
    (RangeError, "invalid_input"),
    (FileNotFoundError, "file_not_found"),
    (OSError, "io_error"),
)


@cache
def strings() -> dict[str, dict[str, str]]:
    """Return the CLI message texts."""
    text = resources.files(PACKAGE).joinpath("strings.json").read_text(encoding="utf-8")
    messages: dict[str, dict[str, str]] = json.loads(text)["cli"]
    return messages


def error_message(err: BaseException) -> str:
    """Return the user-facing text for an error."""
    key = next((key for kind, key in ERROR_KEYS if isinstance(err, kind)), "unknown")
    return strings()["error"][key].format(error=err)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError as err:
        raise argparse.ArgumentTypeError(
            f"expected comma separated numbers: {text}"
        ) from err


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser."""
    parser = argparse.ArgumentParser(
        prog=PACKAGE, description="Eddy viscosity model diagnostics"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug output")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="run the solver from a config file")
    simulate.add_argument("--config", type=Path, required=True)
    simulate.add_argument("--out", type=Path, required=True)

    taylor_green = commands.add_parser(
        "taylor-green", help="run the decaying Taylor-Green vortex"
    )
    taylor_green.add_argument("--n", type=int, required=True)
    taylor_green.add_argument("--nu", type=float, required=True)
    taylor_green.add_argument("--t-end", type=float, required=True)
    taylor_green.add_argument("--snapshot-every", type=int, default=1)
    taylor_green.add_argument("--out", type=Path, required=True)

    analyze = commands.add_parser("analyze", help="compute the diagnostics report")
    analyze.add_argument("--manifest", type=Path, required=True)
    analyze.add_argument("--beta", type=_float_list)
    analyze.add_argument("--flag-threshold", type=float)
    analyze.add_argument("--report", type=Path, required=True)
    analyze.add_argument("--dump-dissipation-field", type=Path, metavar="DIR")
    analyze.add_argument("--workers", type=int, help="threads for snapshot reads")

    verify = commands.add_parser("verify", help="run the invariant checks")
    verify.add_argument("--manifest", type=Path, required=True)
    verify.add_argument("--workers", type=int, help="threads for snapshot reads")
    return parser


def _simulate(config: SolverConfig, out: Path) -> int:
    writer = SnapshotWriter(out)
    run(config, writer)
    manifest = Manifest(
        snapshots=(),
        nu=config.nu,
        closure=config.closure,
        gradient_scheme=GradientScheme.SPECTRAL,
    )
    path = writer.finish(manifest)
    print(strings()["result"]["run_written"].format(count=len(writer.paths), path=path))
    return EXIT_OK


def _analyze(args: argparse.Namespace) -> int:
    manifest = read_manifest(args.manifest).with_overrides(
        args.beta, args.flag_threshold
    )
    series = load_series(manifest, args.workers)
    report = DiagnosticsCoordinator(series, manifest.options()).refresh()
    write_report(report, args.report)
    if args.dump_dissipation_field is not None:
        dump_dissipation_fields(series, manifest, args.dump_dissipation_field)
    print(strings()["result"]["report_written"].format(path=args.report))
    if report.flags_raised:
        print(
            strings()["result"]["flags_raised"].format(
                causes="; ".join(report.verdicts.causes)
            )
        )
        return EXIT_FLAGGED
    return EXIT_OK


def _verify(args: argparse.Namespace) -> int:
    manifest = read_manifest(args.manifest)
    series = load_series(manifest, args.workers)
    checks = invariant_suite(
        series,
        manifest.nu,
        manifest.closure,
        manifest.tail_fraction,
        manifest.gradient_scheme,
    )
    for check in checks:
        print(f"{'PASS' if check.passed else 'FAIL'} {check.name}: {check.detail}")
    failed = sum(not check.passed for check in checks)
    if failed:
        print(strings()["result"]["invariants_failed"].format(count=failed))
        return EXIT_FLAGGED
    return EXIT_OK


def dispatch(args: argparse.Namespace) -> int:
    """Run one parsed command."""
    match args.command:
        case "simulate":
            return _simulate(load_solver_config(args.config), args.out)
        case "taylor-green":
            config = SolverConfig(
                n=args.n,
                nu=args.nu,
                t_end=args.t_end,
                closure=NO_MODEL,
                snapshot_every=args.snapshot_every,
            )
            return _simulate(config, args.out)
        case "analyze":
            return _analyze(args)
        case "verify":
            return _verify(args)
    raise ValueError(f"unknown command {args.command}")


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else EXIT_INPUT_ERROR

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return dispatch(args)
    except (EVDiagError, OSError) as err:
        print(error_message(err), file=sys.stderr)
        return EXIT_INPUT_ERROR
    except Exception as err:  # pylint: disable=broad-exception-caught
        _LOGGER.exception("Unexpected exception")
        print(error_message(err), file=sys.stderr)
        return EXIT_INPUT_ERROR
