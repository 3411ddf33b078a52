"""Forward synthesis, inversion and the files each step leaves behind."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import TimeBasis, build_basis, coupling_matrix
from .config import RunConfig
from .elasticity import ElasticityField, SpatialGrid, preset
from .forward import (
    BoundaryTraces,
    InitialData,
    StabilityReport,
    add_noise,
    check_stability,
    extract_traces,
    simulate,
    trace_stencil_nodes,
)
from .io import file_digest, read_traces_csv, version_string, write_grid_csv, write_manifest, write_traces_csv
from .recon import ReconstructionReport, reconstruct_initial, report
from .reduction import assemble, boundary_mask, modal_boundary_data
from .solver import ModalSolution, solve

__all__ = ["ForwardResult", "InversionResult", "synthesize", "invert", "run_forward", "run_invert", "truth_on_inner"]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ForwardResult:
    outer: SpatialGrid
    inner: SpatialGrid
    init: InitialData
    clean: BoundaryTraces
    traces: BoundaryTraces
    stability: StabilityReport
    seconds: float


@dataclass(frozen=True, eq=False)
class InversionResult:
    basis: TimeBasis
    solution: ModalSolution
    p: np.ndarray
    q: np.ndarray
    report: ReconstructionReport | None
    n_unknowns: int
    n_rows: int
    observed_fraction: float
    seconds: float


def _medium(cfg: RunConfig) -> ElasticityField:
    if cfg.test == "custom":
        raise ValueError("the custom preset needs an explicit elasticity field")
    return preset(cfg.test)


def truth_on_inner(cfg: RunConfig):
    """True ``(p, q)`` sampled on the inner grid."""
    init = InitialData.from_preset(cfg.test, cfg.inner_grid())
    return init.p, init.q


def synthesize(cfg: RunConfig, C: ElasticityField | None = None) -> ForwardResult:
    """Run the forward problem on the outer grid and return noisy boundary traces."""
    t0 = time.perf_counter()
    C = C or _medium(cfg)
    outer = cfg.outer_grid()
    inner = cfg.inner_grid()
    stability = check_stability(C, outer, cfg.dt)
    init = InitialData.from_preset(cfg.test, outer)
    _, stencil = trace_stencil_nodes(outer, inner)
    history = simulate(C, init, outer, cfg.dt, cfg.steps, keep=stencil.ravel())
    clean = extract_traces(history, outer, inner)
    noisy = add_noise(clean, cfg.delta, cfg.seed)
    return ForwardResult(outer, inner, init, clean, noisy, stability, time.perf_counter() - t0)


def invert(
    cfg: RunConfig,
    traces: BoundaryTraces,
    C: ElasticityField | None = None,
    truth=None,
    callback=None,
) -> InversionResult:
    """Assemble and solve the least-squares problem, then read off ``(p, q)``."""
    t0 = time.perf_counter()
    C = C or _medium(cfg)
    grid = traces.grid
    if abs(traces.T - cfg.T) > 1e-9 * cfg.T:
        raise ValueError(f"traces end at T = {traces.T}, configuration says T = {cfg.T}")
    basis = build_basis(cfg.T, cfg.N)
    mask = boundary_mask(grid, cfg.boundary_fraction, cfg.boundary_start)
    data = modal_boundary_data(traces, basis, mask)
    system = assemble(C, grid, basis, coupling_matrix(basis), data, cfg.eta)
    solution = solve(system, cfg.solver.options(), callback)
    p, q = reconstruct_initial(solution, basis)
    rep = None
    if truth is not None:
        rep = report(p, q, truth[0], truth[1])
    return InversionResult(
        basis, solution, p, q, rep, system.shape[1], system.shape[0],
        float(mask.mean()), time.perf_counter() - t0,
    )


def _base_manifest(cfg: RunConfig, command: str) -> dict:
    return {
        "command": command,
        "version": version_string(),
        "seed": cfg.seed,
        "config": cfg.to_dict(),
    }


def run_forward(cfg: RunConfig, out: Path | str | None = None) -> tuple[ForwardResult, dict]:
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    fwd = synthesize(cfg)
    path = out / "traces.csv"
    write_traces_csv(path, fwd.traces)
    manifest = _base_manifest(cfg, "forward")
    manifest["stability"] = {
        "c_max": fwd.stability.c_max,
        "courant": fwd.stability.courant,
        "limit": fwd.stability.limit,
    }
    manifest["traces"] = {"entries": fwd.traces.n_entries, "times": int(fwd.traces.times.size)}
    manifest["files"] = {"traces.csv": file_digest(path)}
    if not cfg.deterministic:
        manifest["timing"] = {"forward_s": round(fwd.seconds, 3)}
    write_manifest(out / "manifest_forward.json", manifest)
    return fwd, manifest


def run_invert(cfg: RunConfig, traces: BoundaryTraces | Path | str, out: Path | str | None = None):
    """Invert ``traces`` (or a trace file) and write fields plus manifest."""
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    source = None
    if not isinstance(traces, BoundaryTraces):
        source = Path(traces)
        traces = read_traces_csv(source)
    truth = truth_on_inner(cfg) if cfg.test != "custom" else None
    inv = invert(cfg, traces, truth=truth)
    grid = traces.grid
    files = {}
    fields = {"p1": inv.p[0], "p2": inv.p[1], "q1": inv.q[0], "q2": inv.q[1]}
    if truth is not None:
        fields.update({"p1_true": truth[0][0], "p2_true": truth[0][1], "q1_true": truth[1][0], "q2_true": truth[1][1]})
    for name, values in fields.items():
        path = out / f"{name}.csv"
        write_grid_csv(path, values, grid)
        files[path.name] = file_digest(path)
    manifest = _base_manifest(cfg, "invert")
    if source is not None:
        manifest["traces_digest"] = file_digest(source)
    manifest["system"] = {
        "unknowns": inv.n_unknowns,
        "rows": inv.n_rows,
        "observed_boundary_fraction": inv.observed_fraction,
    }
    manifest["solver"] = inv.solution.stats()
    if inv.report is not None:
        manifest["metrics"] = inv.report.to_dict()
    manifest["files"] = files
    if not cfg.deterministic:
        manifest["timing"] = {"invert_s": round(inv.seconds, 3)}
    write_manifest(out / "manifest_invert.json", manifest)
    return inv, manifest
