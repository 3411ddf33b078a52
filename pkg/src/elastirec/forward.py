"""Explicit leapfrog solver for the elastic wave equation and boundary traces.

Density is taken as 1, so the model is ``u_tt = div(C : grad u)``.  The outer
domain carries homogeneous Dirichlet conditions.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .elasticity import ElasticityField, SpatialGrid, _cached_operator
from .presets import initial_fields

__all__ = [
    "InitialData",
    "StabilityReport",
    "StabilityError",
    "History",
    "BoundaryTraces",
    "christoffel_max_speed",
    "check_stability",
    "simulate",
    "trace_stencil_nodes",
    "extract_traces",
    "add_noise",
]

log = logging.getLogger(__name__)

COURANT_LIMIT = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class InitialData:
    p: np.ndarray
    q: np.ndarray
    tag: str = "custom"

    @classmethod
    def from_preset(cls, name: str, grid: SpatialGrid) -> "InitialData":
        X, Y = grid.mesh()
        p, q = initial_fields(name, X, Y)
        return cls(p, q, name)

    @classmethod
    def zeros(cls, grid: SpatialGrid) -> "InitialData":
        z = np.zeros((2,) + grid.shape)
        return cls(z, z.copy(), "zero")


@dataclass(frozen=True)
class StabilityReport:
    c_max: float
    courant: float
    limit: float
    accepted: bool
    node: tuple[float, float]
    direction: tuple[float, float]


class StabilityError(ValueError):
    def __init__(self, report: StabilityReport):
        self.report = report
        super().__init__(
            f"Courant number {report.courant:.4g} exceeds {report.limit:.4g}: "
            f"wave speed {report.c_max:.4g} at node {report.node} in direction {report.direction}"
        )


def christoffel_max_speed(Cn: np.ndarray, n_dirs: int = 360):
    """Largest wave speed per node and the direction attaining it.

    ``Cn`` has shape ``(..., 2, 2, 2, 2)``.  Directions are sampled uniformly
    on the half circle (speeds are even in the direction).
    """
    th = np.linspace(0.0, np.pi, n_dirs, endpoint=False)
    n = np.stack([np.cos(th), np.sin(th)], axis=1)
    G = np.einsum("...ijkl,dj,dl->...dik", Cn, n, n)
    ev = np.linalg.eigvalsh(G)[..., -1]
    k = np.argmax(ev, axis=-1)
    speed = np.sqrt(np.max(ev, axis=-1))
    return speed, n[k]


def check_stability(C: ElasticityField, grid: SpatialGrid, dt: float, strict: bool = True) -> StabilityReport:
    """CFL check ``c_max dt / h <= 1/sqrt(2)`` with ``c_max`` from the Christoffel matrix."""
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    speed, dirs = christoffel_max_speed(C.on_grid(grid))
    flat = int(np.argmax(speed))
    ix, iy = np.unravel_index(flat, grid.shape)
    c_max = float(speed.ravel()[flat])
    courant = c_max * dt / grid.h
    report = StabilityReport(
        c_max=c_max,
        courant=courant,
        limit=COURANT_LIMIT,
        accepted=courant <= COURANT_LIMIT,
        node=(float(grid.xs[ix]), float(grid.ys[iy])),
        direction=tuple(float(v) for v in dirs[ix, iy]),
    )
    if strict and not report.accepted:
        raise StabilityError(report)
    return report


@dataclass(eq=False)
class History:
    """Recorded output of :func:`simulate`.

    ``values[k]`` holds both displacement components at the ``keep`` nodes
    after ``k`` steps, shape ``(steps + 1, 2, len(keep))``.
    """

    grid: SpatialGrid
    dt: float
    keep: np.ndarray
    values: np.ndarray
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    energy: np.ndarray | None = None

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.shape[0])

    def at(self, nodes) -> np.ndarray:
        """Time series at flat node indices ``nodes``: ``(steps + 1, 2, len(nodes))``."""
        nodes = np.asarray(nodes)
        pos = np.searchsorted(self.keep, nodes)
        pos = np.clip(pos, 0, self.keep.size - 1)
        if np.any(self.keep[pos] != nodes):
            raise KeyError("requested nodes were not recorded during the simulation")
        return self.values[:, :, pos]


def _interior_operator(C: ElasticityField, grid: SpatialGrid):
    L = _cached_operator(C, grid)
    interior = grid.interior_index
    cols = np.concatenate([interior, grid.size + interior])
    return L[:, cols].tocsr(), interior


def simulate(
    C: ElasticityField,
    init: InitialData,
    grid: SpatialGrid,
    dt: float,
    steps: int,
    keep=None,
    snapshot_steps=(),
    track_energy: bool = False,
    check_every: int = 64,
) -> History:
    """Leapfrog time stepping from ``(p, q)``.

    ``u^1 = u^0 + dt q + dt^2/2 L u^0`` and ``u^{k+1} = 2u^k - u^{k-1} + dt^2 L u^k``.
    Only the nodes in ``keep`` (flat indices, default: all) are recorded at
    every step; full fields are stored for ``snapshot_steps``.  With
    ``track_energy`` the discrete energy
    ``E^{k+1/2} = |(u^{k+1} - u^k)/dt|^2/2 - <u^{k+1}, L u^k>/2`` (area weighted)
    is recorded for ``k = 0..steps-1``.
    """
    check_stability(C, grid, dt)
    if steps < 1:
        raise ValueError("need at least one time step")
    L, interior = _interior_operator(C, grid)
    n_int = interior.size
    keep = np.arange(grid.size) if keep is None else np.unique(np.asarray(keep, dtype=int))
    # Position of each kept node among interior unknowns; -1 marks the outer boundary.
    lookup = np.full(grid.size, -1)
    lookup[interior] = np.arange(n_int)
    kpos = lookup[keep]
    kin = kpos >= 0

    p = np.asarray(init.p, float).reshape(2, -1)
    q = np.asarray(init.q, float).reshape(2, -1)
    if np.any(np.abs(p[:, ~np.isin(np.arange(grid.size), interior)]) > 0):
        log.warning("initial displacement is nonzero on the outer boundary; it is dropped")

    cur = p[:, interior].reshape(-1)
    vel = q[:, interior].reshape(-1)
    values = np.zeros((steps + 1, 2, keep.size))
    area = grid.h**2
    energy = np.zeros(steps) if track_energy else None
    snaps = {}
    wanted = set(int(s) for s in snapshot_steps)

    def record(k, state):
        s = state.reshape(2, n_int)
        values[k][:, kin] = s[:, kpos[kin]]
        if k in wanted:
            full = np.zeros((2, grid.size))
            full[:, interior] = s
            snaps[k] = full.reshape((2,) + grid.shape)

    record(0, cur)
    Lu = L @ cur
    nxt = cur + dt * vel + 0.5 * dt**2 * Lu
    for k in range(1, steps + 1):
        if track_energy:
            energy[k - 1] = 0.5 * area * (np.dot((nxt - cur) / dt, (nxt - cur) / dt) - np.dot(nxt, Lu))
        prev, cur = cur, nxt
        record(k, cur)
        if k % check_every == 0 or k == steps:
            if not np.all(np.isfinite(cur)):
                raise FloatingPointError(f"non-finite displacement at step {k}")
        if k == steps:
            break
        Lu = L @ cur
        nxt = 2.0 * cur - prev + dt**2 * Lu
    return History(grid, dt, keep, values, snaps, energy)


def leapfrog(C: ElasticityField, grid: SpatialGrid, dt: float, prev: np.ndarray, cur: np.ndarray, steps: int):
    """Advance ``steps`` plain leapfrog steps from full fields ``(u^{k-1}, u^k)``.

    Fields have shape ``(2, nx, ny)``; returns the last two states.  Swapping
    the arguments runs the scheme backwards in time.
    """
    L, interior = _interior_operator(C, grid)
    a = np.asarray(prev, float).reshape(2, -1)[:, interior].reshape(-1)
    b = np.asarray(cur, float).reshape(2, -1)[:, interior].reshape(-1)
    for _ in range(steps):
        a, b = b, 2.0 * b - a + dt**2 * (L @ b)

    def full(v):
        out = np.zeros((2, grid.size))
        out[:, interior] = v.reshape(2, -1)
        return out.reshape((2,) + grid.shape)

    return full(a), full(b)


@dataclass(frozen=True, eq=False)
class BoundaryTraces:
    """Cauchy data on the boundary of the inner grid ``grid``.

    One entry per (boundary node, outward normal); corners carry two entries.
    ``f`` and ``g`` have shape ``(n_times, n_entries, 2)``.
    """

    grid: SpatialGrid
    times: np.ndarray
    ix: np.ndarray
    iy: np.ndarray
    normal: np.ndarray
    node_id: np.ndarray
    f: np.ndarray
    g: np.ndarray
    delta: float = 0.0
    seed: int | None = None

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def n_entries(self) -> int:
        return self.ix.size

    @property
    def xy(self) -> np.ndarray:
        return np.stack([self.grid.xs[self.ix], self.grid.ys[self.iy]], axis=1)


def trace_stencil_nodes(grid_G: SpatialGrid, omega: SpatialGrid):
    """G-grid flat indices of each boundary entry of ``omega`` and its two inward neighbours.

    Returns ``(entries, stencil)`` where ``entries = (ix, iy, normal, node_id)``
    on the omega grid and ``stencil`` has shape ``(n_entries, 3)``.
    """
    i0, j0 = grid_G.locate(omega.x0, omega.y0)
    if abs(omega.h - grid_G.h) > 1e-12 * grid_G.h:
        raise ValueError("inner grid must share the outer grid spacing")
    grid_G.locate(omega.x1, omega.y1)
    ix, iy, normal, node_id = omega.boundary_entries()
    sx = -np.rint(normal[:, 0]).astype(int)
    sy = -np.rint(normal[:, 1]).astype(int)
    gx, gy = ix + i0, iy + j0
    stencil = np.stack([(gx + s * sx) * grid_G.ny + (gy + s * sy) for s in range(3)], axis=1)
    return (ix, iy, normal, node_id), stencil


def extract_traces(history: History, grid_G: SpatialGrid, omega: SpatialGrid) -> BoundaryTraces:
    """Dirichlet values and one-sided normal derivatives on the boundary of ``omega``."""
    (ix, iy, normal, node_id), stencil = trace_stencil_nodes(grid_G, omega)
    u = history.at(stencil.ravel()).reshape(history.values.shape[0], 2, -1, 3)
    f = u[..., 0]
    g = (3.0 * u[..., 0] - 4.0 * u[..., 1] + u[..., 2]) / (2.0 * grid_G.h)
    return BoundaryTraces(
        grid=omega,
        times=history.times,
        ix=ix,
        iy=iy,
        normal=normal,
        node_id=node_id,
        f=np.ascontiguousarray(f.transpose(0, 2, 1)),
        g=np.ascontiguousarray(g.transpose(0, 2, 1)),
    )


def add_noise(traces: BoundaryTraces, delta: float, seed: int | None = None) -> BoundaryTraces:
    """Multiplicative noise ``f (1 + delta r)`` with ``r ~ U[-1, 1]`` drawn per sample and component."""
    if delta < 0:
        raise ValueError(f"noise level must be non-negative, got {delta}")
    if delta == 0:
        return replace(traces, delta=0.0, seed=seed)
    rng = np.random.default_rng(seed)
    f = traces.f * (1.0 + delta * rng.uniform(-1.0, 1.0, traces.f.shape))
    g = traces.g * (1.0 + delta * rng.uniform(-1.0, 1.0, traces.g.shape))
    return replace(traces, f=f, g=g, delta=float(delta), seed=seed)
