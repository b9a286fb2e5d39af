"""Snapshot files, manifests and report serialization.

A snapshot file is a 60 byte little-endian header followed by float64
payload arrays, x varying fastest::

    magic "EVDG" | version u32 | ndim u32 | nx ny nz u32 | dx dy dz f64
    | time f64 | field_mask u32

Masked fields follow in the order velocity, nu_turb, l, k', forcing; vector
fields store their components one after another.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from concurrent.futures import ThreadPoolExecutor
import dataclasses
from enum import Enum
import json
import logging
import math
from pathlib import Path
import struct
from typing import Any

import numpy as np

from .config import Manifest, format_config, load_manifest, manifest_to_data
from .const import (
    FIELD_FORCING,
    FIELD_KPRIME,
    FIELD_MIXING_LENGTH,
    FIELD_NU_TURB,
    FIELD_VELOCITY,
    MANIFEST_NAME,
    REPORT_SCHEMA_VERSION,
    SNAPSHOT_HEADER_FORMAT,
    SNAPSHOT_MAGIC,
    SNAPSHOT_VERSION,
    UNAVAILABLE,
)
from .diagnostics import dissipation_density
from .exceptions import SnapshotFormatError, SnapshotLengthError, ValidationError
from .grid import Field, Grid, Snapshot, SnapshotSeries
from .models import DiagnosticsReport

_LOGGER = logging.getLogger(__name__)

HEADER = struct.Struct(SNAPSHOT_HEADER_FORMAT)
VERSION_OFFSET = 4
NDIM_OFFSET = 8
NZ_OFFSET = 20
TIME_OFFSET = 48
MASK_OFFSET = 56

# Field attribute, mask bit and rank, in payload order
PAYLOAD_FIELDS = (
    ("velocity", FIELD_VELOCITY, 1),
    ("nu_turb", FIELD_NU_TURB, 0),
    ("mixing_length", FIELD_MIXING_LENGTH, 0),
    ("kprime", FIELD_KPRIME, 0),
    ("forcing", FIELD_FORCING, 1),
)
KNOWN_FIELDS = sum(bit for _, bit, _ in PAYLOAD_FIELDS)
REPORT_INDENT = 2


def snapshot_name(index: int) -> str:
    """Return the file name of the snapshot with the given index."""
    return f"snapshot_{index:06d}.evdg"


def _components(values: np.ndarray, rank: int) -> Iterator[np.ndarray]:
    if rank == 0:
        yield values
    else:
        yield from values


def encode_snapshot(snapshot: Snapshot) -> bytes:
    """Return the binary encoding of a snapshot."""
    grid = snapshot.grid
    mask = 0
    payload = []
    for name, bit, rank in PAYLOAD_FIELDS:
        item: Field | None = getattr(snapshot, name)
        if item is None:
            continue
        mask |= bit
        payload.extend(
            np.ascontiguousarray(c.ravel(order="F"), dtype="<f8").tobytes()
            for c in _components(item.values, rank)
        )
    header = HEADER.pack(
        SNAPSHOT_MAGIC,
        SNAPSHOT_VERSION,
        grid.ndim,
        *grid.shape,
        *grid.spacing,
        snapshot.time,
        mask,
    )
    return header + b"".join(payload)


def decode_snapshot(
    data: bytes, periodic: tuple[bool, bool, bool] = (True, True, True)
) -> Snapshot:
    """Decode a snapshot, validating the header, payload length and values."""
    if len(data) < HEADER.size:
        raise SnapshotLengthError(
            f"file holds {len(data)} bytes, shorter than the {HEADER.size} byte header"
        )
    magic, version, ndim, nx, ny, nz, dx, dy, dz, time, mask = HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}", 0)
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"unsupported version {version}", VERSION_OFFSET)
    if ndim not in (2, 3):
        raise SnapshotFormatError(f"unsupported ndim {ndim}", NDIM_OFFSET)
    if ndim == 2 and nz != 1:
        raise SnapshotFormatError(f"nz must be 1 for ndim 2, got {nz}", NZ_OFFSET)
    if not math.isfinite(time):
        raise SnapshotFormatError(f"non-finite time {time}", TIME_OFFSET)
    if not mask & FIELD_VELOCITY or mask & ~KNOWN_FIELDS:
        raise SnapshotFormatError(f"invalid field mask {mask:#x}", MASK_OFFSET)

    try:
        grid = Grid(ndim, (nx, ny, nz), (dx, dy, dz), periodic)
    except ValidationError as err:
        raise SnapshotFormatError(str(err), NDIM_OFFSET) from err
    points = nx * ny * nz
    counts = [(name, rank) for name, bit, rank in PAYLOAD_FIELDS if mask & bit]
    expected = sum(ndim**rank for _, rank in counts) * points * 8
    payload = memoryview(data)[HEADER.size :]
    if len(payload) != expected:
        raise SnapshotLengthError(
            f"payload holds {len(payload)} bytes, header declares {expected}"
        )

    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    fields: dict[str, Field] = {}
    offset = 0
    for name, rank in counts:
        size = ndim**rank * points
        block = values[offset : offset + size]
        offset += size
        if not np.all(np.isfinite(block)):
            raise ValidationError(f"{name}: non-finite values at t={time}")
        components = [
            c.reshape(grid.shape, order="F") for c in block.reshape(-1, points)
        ]
        array = np.stack(components).reshape((ndim,) * rank + grid.shape)
        fields[name] = Field(grid, array, rank, time, name)
    return Snapshot(**fields)


def write_snapshot(path: Path, snapshot: Snapshot) -> None:
    """Write one snapshot file."""
    path.write_bytes(encode_snapshot(snapshot))
    _LOGGER.debug("Wrote snapshot t=%s to %s", snapshot.time, path)


def read_snapshot(
    path: Path, periodic: tuple[bool, bool, bool] = (True, True, True)
) -> Snapshot:
    """Read one snapshot file."""
    return decode_snapshot(path.read_bytes(), periodic)


def write_manifest(path: Path, manifest: Manifest) -> None:
    """Write a manifest with snapshot paths relative to its directory."""
    path.write_text(
        format_config(manifest_to_data(manifest, path.parent)), encoding="utf-8"
    )


def read_manifest(path: Path) -> Manifest:
    """Read and validate a manifest."""
    return load_manifest(path)


def load_series(manifest: Manifest, workers: int | None = None) -> SnapshotSeries:
    """Read every snapshot of a manifest in parallel, keeping manifest order."""
    with ThreadPoolExecutor(max_workers=workers) as pool:
        snapshots = list(
            pool.map(lambda p: read_snapshot(p, manifest.periodic), manifest.snapshots)
        )
    _LOGGER.debug("Loaded %d snapshots", len(snapshots))
    return SnapshotSeries(tuple(snapshots))


class SnapshotWriter:
    """Stream solver snapshots into a directory and write its manifest at the end."""

    def __init__(self, directory: Path) -> None:
        """Initialize the writer, creating the directory."""
        self.directory = directory
        directory.mkdir(parents=True, exist_ok=True)
        self.paths: list[Path] = []

    def __call__(self, index: int, snapshot: Snapshot) -> None:
        """Write one snapshot."""
        path = self.directory / snapshot_name(index)
        write_snapshot(path, snapshot)
        self.paths.append(path)

    def finish(self, manifest: Manifest) -> Path:
        """Write the manifest listing the streamed snapshots."""
        path = self.directory / MANIFEST_NAME
        write_manifest(path, dataclasses.replace(manifest, snapshots=tuple(self.paths)))
        _LOGGER.info("Wrote %d snapshots and %s", len(self.paths), path)
        return path


def _plain(value: Any) -> Any:
    """Convert report values to JSON types, None becoming the unavailable marker."""
    if value is None:
        return UNAVAILABLE
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)
        }
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, float | np.floating):
        return float(value)
    return str(value)


def _encode_float(value: float) -> str:
    if math.isnan(value):
        return '"nan"'
    if math.isinf(value):
        return '"inf"' if value > 0 else '"-inf"'
    text = format(value, ".17g")
    if "." not in text and "e" not in text:
        text += ".0"
    return text


def _encode(value: Any, indent: int, level: int) -> Iterator[str]:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            yield "{}"
            return
        yield "{\n"
        for position, (key, item) in enumerate(value.items()):
            yield f"{pad}{json.dumps(key)}: "
            yield from _encode(item, indent, level + 1)
            yield ",\n" if position < len(value) - 1 else "\n"
        yield end + "}"
    elif isinstance(value, list):
        if not value:
            yield "[]"
            return
        yield "[\n"
        for position, item in enumerate(value):
            yield pad
            yield from _encode(item, indent, level + 1)
            yield ",\n" if position < len(value) - 1 else "\n"
        yield end + "]"
    elif isinstance(value, bool) or value is None:
        yield json.dumps(value)
    elif isinstance(value, float):
        yield _encode_float(value)
    else:
        yield json.dumps(value)


def report_to_dict(report: DiagnosticsReport) -> dict[str, Any]:
    """Return the report as plain data, keys in schema order."""
    data: dict[str, Any] = {"schema_version": REPORT_SCHEMA_VERSION}
    for item in dataclasses.fields(report):
        data[item.name] = _plain(getattr(report, item.name))
    data["flags_raised"] = report.flags_raised
    return data


def report_to_json(report: DiagnosticsReport) -> str:
    """Return the report as deterministic JSON text."""
    return "".join(_encode(report_to_dict(report), REPORT_INDENT, 0)) + "\n"


def write_report(report: DiagnosticsReport, path: Path) -> None:
    """Write the report JSON."""
    path.write_text(report_to_json(report), encoding="utf-8")
    _LOGGER.info("Wrote report %s", path)


def dump_dissipation_fields(
    series: SnapshotSeries, manifest: Manifest, directory: Path
) -> list[Path]:
    """Write the per-cell dissipation fields of every snapshot as .npy arrays."""
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for index, snapshot in enumerate(series):
        viscous, model = dissipation_density(
            snapshot, manifest.nu, manifest.closure, manifest.gradient_scheme
        )
        for label, item in (("eps0", viscous), ("eps_turb", model)):
            path = directory / f"{label}_{index:06d}.npy"
            np.save(path, item.values)
            written.append(path)
    _LOGGER.info("Wrote %d dissipation fields to %s", len(written), directory)
    return written
