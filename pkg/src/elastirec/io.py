"""Plain-text outputs: CSV grids, trace tables and the JSON run manifest.

Every CSV starts with a single ``#`` header line of ``key=value`` pairs.
Floats are written with 17 significant digits so that files round-trip
exactly.
"""
from __future__ import annotations

import hashlib
import json
import subprocess
from pathlib import Path

import numpy as np

from .elasticity import SpatialGrid
from .forward import BoundaryTraces

__all__ = [
    "write_grid_csv",
    "read_grid_csv",
    "write_traces_csv",
    "read_traces_csv",
    "write_manifest",
    "version_string",
    "file_digest",
    "NORMAL_CODES",
]

FLOAT = "%.17g"
TRACE_COLUMNS = ("node", "x", "y", "normal", "t", "f1", "f2", "g1", "g2")
# Outward normals of the four sides, in the order the boundary is walked.
NORMAL_CODES = np.array([[0, -1], [1, 0], [0, 1], [-1, 0]], dtype=float)


def _header(**items) -> str:
    return "# " + " ".join(f"{k}={v!r}" if isinstance(v, str) else f"{k}={v}" for k, v in items.items())


def _parse_header(line: str, path) -> dict:
    if not line.startswith("#"):
        raise ValueError(f"{path}:1: missing '#' header line")
    out = {}
    for token in line[1:].split():
        key, sep, value = token.partition("=")
        if not sep:
            raise ValueError(f"{path}:1: malformed header entry {token!r}")
        out[key] = value.strip("'")
    return out


def write_grid_csv(path, values: np.ndarray, grid: SpatialGrid) -> None:
    """One row per x index, one column per y index."""
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError(f"field of shape {values.shape} does not match grid {grid.shape}")
    head = _header(nx=grid.nx, ny=grid.ny, h=grid.h, x0=grid.x0, y0=grid.y0)
    with open(path, "w") as fh:
        fh.write(head + "\n")
        np.savetxt(fh, values, fmt=FLOAT, delimiter=",")


def read_grid_csv(path):
    """Returns ``(values, grid)``."""
    with open(path) as fh:
        meta = _parse_header(fh.readline(), path)
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    grid = SpatialGrid(float(meta["x0"]), float(meta["y0"]), float(meta["h"]), int(meta["nx"]), int(meta["ny"]))
    if values.shape != grid.shape:
        raise ValueError(f"{path}: header says {grid.shape}, body has {values.shape}")
    return values, grid


def _normal_codes(normal: np.ndarray) -> np.ndarray:
    match = np.all(np.abs(normal[:, None, :] - NORMAL_CODES[None]) < 1e-12, axis=2)
    if not np.all(match.any(axis=1)):
        raise ValueError("normals must be axis-aligned unit vectors")
    return np.argmax(match, axis=1)


def write_traces_csv(path, traces: BoundaryTraces) -> None:
    """Rows grouped by boundary entry, time increasing within each entry."""
    g = traces.grid
    nt, ne = traces.times.size, traces.n_entries
    head = _header(
        nx=g.nx, ny=g.ny, h=g.h, x0=g.x0, y0=g.y0, entries=ne, times=nt,
        delta=traces.delta, seed="none" if traces.seed is None else traces.seed,
        columns=",".join(TRACE_COLUMNS),
    )
    xy = traces.xy
    table = np.empty((ne, nt, 9))
    table[:, :, 0] = traces.node_id[:, None]
    table[:, :, 1] = xy[:, 0, None]
    table[:, :, 2] = xy[:, 1, None]
    table[:, :, 3] = _normal_codes(traces.normal)[:, None]
    table[:, :, 4] = traces.times[None, :]
    table[:, :, 5:7] = traces.f.transpose(1, 0, 2)
    table[:, :, 7:9] = traces.g.transpose(1, 0, 2)
    fmt = ["%d", FLOAT, FLOAT, "%d"] + [FLOAT] * 5
    with open(path, "w") as fh:
        fh.write(head + "\n")
        np.savetxt(fh, table.reshape(-1, 9), fmt=fmt, delimiter=",")


def read_traces_csv(path) -> BoundaryTraces:
    with open(path) as fh:
        meta = _parse_header(fh.readline(), path)
        table = np.loadtxt(fh, delimiter=",", ndmin=2)
    ne, nt = int(meta["entries"]), int(meta["times"])
    if table.shape != (ne * nt, 9):
        raise ValueError(f"{path}: expected {ne * nt} rows of 9 columns, found {table.shape}")
    grid = SpatialGrid(float(meta["x0"]), float(meta["y0"]), float(meta["h"]), int(meta["nx"]), int(meta["ny"]))
    table = table.reshape(ne, nt, 9)
    node = table[:, 0, 0].astype(int)
    times = table[0, :, 4].copy()
    if not np.array_equal(table[:, :, 4], np.broadcast_to(times, (ne, nt))):
        raise ValueError(f"{path}: entries do not share one time axis")
    seed = None if meta["seed"] == "none" else int(meta["seed"])
    ix = np.rint((table[:, 0, 1] - grid.x0) / grid.h).astype(int)
    iy = np.rint((table[:, 0, 2] - grid.y0) / grid.h).astype(int)
    return BoundaryTraces(
        grid=grid,
        times=times,
        ix=ix,
        iy=iy,
        normal=NORMAL_CODES[table[:, 0, 3].astype(int)],
        node_id=node,
        f=np.ascontiguousarray(table[:, :, 5:7].transpose(1, 0, 2)),
        g=np.ascontiguousarray(table[:, :, 7:9].transpose(1, 0, 2)),
        delta=float(meta["delta"]),
        seed=seed,
    )


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def version_string() -> str:
    """``git describe`` of the source tree, or the package version outside a checkout."""
    from . import __version__

    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=here, capture_output=True, text=True, timeout=5, check=True,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    described = out.stdout.strip()
    return f"{__version__}+g{described}" if described else __version__


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
