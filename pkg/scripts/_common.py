"""Shared bits of the experiment scripts."""
from __future__ import annotations

import argparse
import json
from dataclasses import replace
from pathlib import Path

from elastirec.config import RunConfig


def base_parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--test", default="test1", choices=("test1", "test2", "test3"))
    p.add_argument("--fast", action="store_true", help="coarse profile: inner grid 21 x 21, N = 10")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--grid", type=int, default=None, help="outer grid points per axis")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--out", type=Path, default=None)
    return p


def config_from(args, **overrides) -> RunConfig:
    cfg = RunConfig(test=args.test, deterministic=True)
    if args.fast:
        cfg = cfg.fast()
    sizes = {k: getattr(args, k) for k in ("grid", "steps", "N") if getattr(args, k) is not None}
    if sizes:
        cfg = replace(cfg, **sizes)
    if args.max_iter is not None:
        cfg = replace(cfg, solver=replace(cfg.solver, max_iter=args.max_iter))
    return replace(cfg, **overrides) if overrides else cfg


def dump(rows, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(rows, indent=2) + "\n")
    print(f"wrote {path}")


def error_line(report) -> str:
    return "  ".join(f"{k} {100 * m.max_rel_error:6.2f}% (IoU {m.iou:.2f})" for k, m in report.components.items())


__all__ = ["base_parser", "config_from", "dump", "error_line"]
