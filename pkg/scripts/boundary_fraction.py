"""Full boundary against a contiguous observed arc, on the same noisy data."""
from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from _common import base_parser, config_from, dump, error_line
from elastirec.pipeline import invert, synthesize, truth_on_inner


def main(argv=None):
    p = base_parser(__doc__)
    p.add_argument("--fractions", type=float, nargs="+", default=[1.0, 0.75, 0.5])
    args = p.parse_args(argv)
    cfg = config_from(args)
    out = args.out or Path("runs") / f"boundary_fraction_{cfg.test}"

    traces = synthesize(cfg).traces
    truth = truth_on_inner(cfg)
    rows = []
    for frac in args.fractions:
        inv = invert(replace(cfg, boundary_fraction=frac), traces, truth=truth)
        print(f"fraction {frac:.2f} (observed {inv.observed_fraction:.3f}): {error_line(inv.report)}")
        rows.append({
            "fraction": frac,
            "observed": inv.observed_fraction,
            "solver": inv.solution.stats(),
            "metrics": inv.report.to_dict(),
        })
    dump(rows, out / "boundary_fraction.json")


if __name__ == "__main__":
    main()
