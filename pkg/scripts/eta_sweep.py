"""Regularization sweep on one noisy data set: errors and L-curve norms per eta."""
from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from _common import base_parser, config_from, dump, error_line
from elastirec.basis import build_basis, coupling_matrix
from elastirec.pipeline import synthesize, truth_on_inner
from elastirec.recon import reconstruct_initial, report
from elastirec.reduction import assemble, boundary_mask, modal_boundary_data
from elastirec.elasticity import preset
from elastirec.solver import solve


def main(argv=None):
    p = base_parser(__doc__)
    p.add_argument("--etas", type=float, nargs="+", default=[1e-4, 1e-6, 1e-8])
    args = p.parse_args(argv)
    cfg = config_from(args)
    out = args.out or Path("runs") / f"eta_sweep_{cfg.test}"

    fwd = synthesize(cfg)
    traces = fwd.traces
    basis = build_basis(cfg.T, cfg.N)
    S = coupling_matrix(basis)
    data = modal_boundary_data(traces, basis, boundary_mask(traces.grid, cfg.boundary_fraction))
    truth = truth_on_inner(cfg)
    C = preset(cfg.test)

    rows = []
    for eta in args.etas:
        system = assemble(C, traces.grid, basis, S, data, eta)
        sol = solve(system, replace(cfg, eta=eta).solver.options())
        r = system.matrix @ sol.U.ravel() - system.rhs
        by_tag = {tag: float(np.linalg.norm(r[system.rows_tagged(tag)])) for tag in ("pde", "dirichlet", "neumann")}
        reg = float(np.sqrt(sum(np.sum(r[system.rows_tagged(t)] ** 2) for t in ("reg-0", "reg-1", "reg-2"))))
        rep = report(*reconstruct_initial(sol, basis), *truth)
        print(f"eta {eta:.0e}: {error_line(rep)}  [{sol.iterations} it]")
        rows.append({
            "eta": eta,
            "misfit": by_tag,
            "regularization_norm": reg / np.sqrt(eta),
            "solver": sol.stats(),
            "metrics": rep.to_dict(),
        })
    dump(rows, out / "eta_sweep.json")


if __name__ == "__main__":
    main()
