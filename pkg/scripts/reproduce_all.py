"""Run the three presets end to end and print computed against reference errors."""
from __future__ import annotations

from pathlib import Path

from _common import base_parser, config_from, dump
from elastirec.cli import acceptance_bands
from elastirec.pipeline import run_forward, run_invert
from elastirec.presets import REFERENCE_ERRORS


def main(argv=None):
    p = base_parser(__doc__)
    p.add_argument("--tests", nargs="+", default=["test1", "test2", "test3"])
    args = p.parse_args(argv)
    root = args.out or Path("runs") / "reproduce_all"
    summary = {}
    for test in args.tests:
        args.test = test
        cfg = config_from(args, out=str(root / test))
        fwd, _ = run_forward(cfg)
        _, manifest = run_invert(cfg, fwd.traces)
        bands = acceptance_bands(test, args.fast)
        summary[test] = {}
        print(f"{test}:")
        for (name, m), ref in zip(manifest["metrics"].items(), REFERENCE_ERRORS[test]):
            ok = m["max_rel_error"] <= bands[name] and m["iou"] >= 0.5
            summary[test][name] = {**m, "reference": ref / 100, "band": bands[name], "pass": ok}
            print(f"  {name}: {100 * m['max_rel_error']:6.2f}%  ref {ref:5.2f}%  band {100 * bands[name]:4.0f}%  "
                  f"IoU {m['iou']:.2f}  {'pass' if ok else 'FAIL'}")
    dump(summary, root / "summary.json")


if __name__ == "__main__":
    main()
