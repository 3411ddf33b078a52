import json

import numpy as np
import pytest

from elastirec import cli
from elastirec.config import FAST_PROFILE, RunConfig, SolverConfig, load_config
from elastirec.elasticity import SpatialGrid
from elastirec.forward import BoundaryTraces
from elastirec.io import read_grid_csv, read_traces_csv, version_string, write_grid_csv, write_traces_csv
from elastirec.pipeline import run_forward, run_invert

# Small enough for a few seconds per run: h = 0.2, inner grid 11 x 11.
TINY = ["--grid", "31", "--steps", "400", "--N", "4", "--max-iter", "400"]


def tiny_config(tmp_path, **kw):
    base = dict(grid=31, steps=400, N=4, out=str(tmp_path), deterministic=True, solver=SolverConfig(max_iter=400))
    base.update(kw)
    return RunConfig(**base)


# ----------------------------------------------------------------- config


def test_defaults_mirror_the_reference_setup():
    cfg = RunConfig()
    assert (cfg.T, cfg.N, cfg.eta, cfg.delta) == (1.0, 30, 1e-6, 0.1)
    assert cfg.outer == (-3.0, 3.0) and cfg.grid == 121 and cfg.steps == 6400
    assert cfg.inner == (-1.0, 1.0)
    assert cfg.h == pytest.approx(0.05) and cfg.dt == pytest.approx(1 / 6400)
    assert cfg.inner_grid().shape == (41, 41)


def test_fast_profile():
    cfg = RunConfig().fast()
    assert cfg.inner_grid().shape == (21, 21)
    assert cfg.N == FAST_PROFILE["N"] == 10
    assert cfg.steps == 1600


def test_padding_keeps_the_spacing():
    cfg = RunConfig().padded(1.5)
    assert cfg.outer == pytest.approx((-4.5, 4.5))
    assert cfg.grid == 181
    assert cfg.h == pytest.approx(RunConfig().h)
    with pytest.raises(ValueError):
        RunConfig().padded(0.5)


def test_validation_lists_every_problem():
    with pytest.raises(ValueError) as exc:
        RunConfig(N=-1, eta=-1.0, boundary_fraction=0.0)
    msg = str(exc.value)
    assert "N:" in msg and "eta:" in msg and "boundary_fraction:" in msg
    assert msg.count("\n") >= 3


def test_json_round_trip(tmp_path):
    cfg = RunConfig(test="test3", N=12, solver=SolverConfig(rtol=1e-6))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_config(path) == cfg


def test_json_errors_name_the_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "N": 10,\n  "eta": oops\n}\n')
    with pytest.raises(ValueError, match=r"bad\.json:3:"):
        load_config(path)


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"N": 10, "modes": 3}')
    with pytest.raises(ValueError, match="modes"):
        load_config(path)


def test_flag_precedence(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"N": 12, "eta": 1e-4, "grid": 61}')
    args = cli.build_parser().parse_args(["invert", "--config", str(path), "--N", "7", "--fast", "--pad", "1.5"])
    cfg = cli.resolve_config(args)
    assert cfg.N == 7  # flag beats both the file and the fast profile
    assert cfg.eta == 1e-4  # file value survives
    assert cfg.steps == 1600  # fast profile beats the default
    assert cfg.grid == 91 and cfg.outer == pytest.approx((-4.5, 4.5))


def test_bad_config_exit_code(capsys):
    assert cli.main(["forward", "--N", "-3"]) == 2
    assert "N:" in capsys.readouterr().err


def test_acceptance_bands():
    assert cli.acceptance_bands("test1") == {"p1": 0.15, "p2": 0.15, "q1": 0.20, "q2": 0.20}
    assert cli.acceptance_bands("test2")["q1"] == 0.30
    assert cli.acceptance_bands("test1", fast=True)["p1"] == 0.30


# --------------------------------------------------------------------- io


def test_grid_csv_round_trip(tmp_path):
    grid = SpatialGrid(-1.0, -0.5, 0.1, 7, 5)
    values = np.random.default_rng(0).normal(size=grid.shape) * 1e3
    write_grid_csv(tmp_path / "g.csv", values, grid)
    back, g2 = read_grid_csv(tmp_path / "g.csv")
    assert g2 == grid
    assert np.array_equal(back, values)
    with pytest.raises(ValueError):
        write_grid_csv(tmp_path / "h.csv", values.T, grid)


def test_trace_csv_round_trip(tmp_path):
    grid = SpatialGrid.square(-1.0, 1.0, 5)
    ix, iy, normal, node_id = grid.boundary_entries()
    rng = np.random.default_rng(1)
    times = np.linspace(0, 1, 9)
    tr = BoundaryTraces(grid, times, ix, iy, normal, node_id,
                        rng.normal(size=(9, ix.size, 2)), rng.normal(size=(9, ix.size, 2)), 0.1, 3)
    write_traces_csv(tmp_path / "t.csv", tr)
    back = read_traces_csv(tmp_path / "t.csv")
    for name in ("times", "ix", "iy", "normal", "node_id", "f", "g"):
        assert np.array_equal(getattr(back, name), getattr(tr, name)), name
    assert (back.delta, back.seed, back.grid) == (0.1, 3, grid)
    header = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert header.startswith("# ") and "columns='node,x,y,normal,t,f1,f2,g1,g2'" in header


def test_headerless_csv_rejected(tmp_path):
    (tmp_path / "x.csv").write_text("1,2\n3,4\n")
    with pytest.raises(ValueError, match="header"):
        read_grid_csv(tmp_path / "x.csv")


def test_version_string():
    from elastirec import __version__

    assert version_string().startswith(__version__)


# --------------------------------------------------------------- commands


def test_forward_writes_traces_and_manifest(tmp_path, capsys):
    assert cli.main(["forward", *TINY, "--out", str(tmp_path), "--deterministic"]) == 0
    tr = read_traces_csv(tmp_path / "traces.csv")
    assert tr.n_entries == 4 * 11  # boundary nodes plus one extra entry per corner
    assert tr.times.size == 401
    assert np.all(np.isfinite(tr.f)) and np.all(np.isfinite(tr.g))
    manifest = json.loads((tmp_path / "manifest_forward.json").read_text())
    assert manifest["config"]["grid"] == 31
    assert manifest["seed"] == 0 and "version" in manifest
    assert "timing" not in manifest
    assert "Courant" in capsys.readouterr().out


def test_noise_free_forward_files_are_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert cli.main(["forward", *TINY, "--delta", "0", "--out", str(tmp_path / sub)]) == 0
    assert (tmp_path / "a" / "traces.csv").read_bytes() == (tmp_path / "b" / "traces.csv").read_bytes()


def test_invert_from_trace_file(tmp_path):
    cfg = tiny_config(tmp_path)
    run_forward(cfg)
    inv, manifest = run_invert(cfg, tmp_path / "traces.csv")
    assert set(manifest["metrics"]) == {"p1", "p2", "q1", "q2"}
    assert all("max_rel_error" in v for v in manifest["metrics"].values())
    assert manifest["solver"]["iterations"] > 0
    assert manifest["system"]["unknowns"] == 5 * 2 * 121
    assert "traces_digest" in manifest
    for name in ("p1", "p2", "q1", "q2", "p1_true", "q2_true"):
        values, grid = read_grid_csv(tmp_path / f"{name}.csv")
        assert grid.shape == (11, 11)
        assert manifest["files"][f"{name}.csv"]


def test_invert_rejects_mismatched_final_time(tmp_path):
    cfg = tiny_config(tmp_path)
    run_forward(cfg)
    with pytest.raises(ValueError, match="T ="):
        run_invert(RunConfig(**{**cfg.__dict__, "T": 2.0, "steps": 800}), tmp_path / "traces.csv")


def test_invert_cli_runs_forward_when_no_traces(tmp_path, capsys):
    assert cli.main(["invert", *TINY, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "p1" in out and "solver:" in out
    assert (tmp_path / "manifest_invert.json").exists()


def test_reproduce_prints_reference_errors(tmp_path, capsys):
    code = cli.main(["reproduce", *TINY, "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code in (0, 1)
    for ref in ("5.37", "5.63", "4.03", "9.87"):
        assert ref in out


@pytest.mark.parametrize("test, refs", [("test2", ("3.28", "0.50", "19.93", "11.96")), ("test3", ("2.14", "4.18", "1.35", "1.71"))])
def test_reference_columns_for_other_presets(test, refs, capsys):
    from elastirec.presets import REFERENCE_ERRORS

    assert tuple(f"{v:.2f}" for v in REFERENCE_ERRORS[test]) == refs


def test_deterministic_runs_are_byte_identical(tmp_path):
    run = tmp_path / "run"
    argv = ["reproduce", *TINY, "--deterministic", "--out", str(run)]
    assert cli.main(argv) in (0, 1)
    first = {p.name: p.read_bytes() for p in run.iterdir()}
    assert cli.main(argv) in (0, 1)
    assert "manifest_invert.json" in first and "q2.csv" in first
    for name, content in first.items():
        assert (run / name).read_bytes() == content, name


def test_basis_diagnostics(capsys):
    assert cli.main(["basis-diag", "--N", "30"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["orthonormality_defect"] < 1e-10
    assert out["coupling_lower_defect"] < 1e-9
    assert out["coupling_diagonal_defect"] < 1e-9
    assert len(out["dd_norm_over_n^3.5"]) == 30


def test_thread_cap_from_environment(monkeypatch):
    from threadpoolctl import threadpool_info

    monkeypatch.setenv("ELASTIREC_THREADS", "1")
    with cli._threads(False):
        assert all(p["num_threads"] == 1 for p in threadpool_info())


def test_half_boundary_is_no_better_than_full(tmp_path):
    from dataclasses import replace

    from elastirec.pipeline import invert, synthesize, truth_on_inner

    cfg = tiny_config(tmp_path)
    traces = synthesize(cfg).traces
    truth = truth_on_inner(cfg)
    full = invert(cfg, traces, truth=truth).report.max_rel_errors()
    half = invert(replace(cfg, boundary_fraction=0.5), traces, truth=truth).report.max_rel_errors()
    assert all(half[k] >= full[k] for k in full)
