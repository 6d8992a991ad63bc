import csv
import json

import pytest

from mmjc import cli
from mmjc import meanfield as mf


def run(tmp_path, command, cfg=None, *extra, name="out"):
    args = [command, "--out", str(tmp_path / name)]
    if cfg is not None:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(cfg))
        args += ["--config", str(path)]
    return cli.main(args + list(extra))


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


MODEL = {"n_modes": 2, "g": [1.0, 2.0], "omega_modes": 10.0, "delta": 0.5}


def test_spectrum_recipe_deterministic_with_sidecar(tmp_path):
    assert run(tmp_path, "spectrum", None, "--recipe", "fig1", name="a") == 0
    assert run(tmp_path, "spectrum", None, "--recipe", "fig1", name="b") == 0
    a = (tmp_path / "a" / "spectrum.csv").read_bytes()
    assert a == (tmp_path / "b" / "spectrum.csv").read_bytes()
    table = rows(tmp_path / "a" / "spectrum.csv")
    assert table[0] == ["delta_over_g", "n1", "n2", "n3", "E_plus", "E_minus"]
    assert len(table) == 1 + 3 * 401
    side = json.loads((tmp_path / "a" / "spectrum.json").read_text())
    assert side["version"] and side["config"]["recipe"] == "fig1"
    assert "manifolds[spectators]" in side["defaults_not_stated_in_figures"]


def test_full_precision_output(tmp_path):
    cfg = dict(MODEL, manifolds=[[1, 2]], delta_over_g_grid=[0.1])
    assert run(tmp_path, "spectrum", cfg) == 0
    r = rows(tmp_path / "out" / "spectrum.csv")[1]
    assert r[0] == "0.10000000000000001"
    assert float(r[3]) == -float(r[4])


def test_empty_grid_is_config_error(tmp_path, capsys):
    cfg = dict(MODEL, manifolds=[[0, 0]], delta_over_g_grid=[])
    assert run(tmp_path, "spectrum", cfg) == cli.EXIT_CONFIG
    assert "empty sweep" in capsys.readouterr().err


@pytest.mark.parametrize("cfg,msg", [
    ({"n_modes": 2, "g": 1.0, "omega_modes": 1.0, "manifolds": [[0, 0]], "delta_over_g_grid": [0]}, "exactly one"),
    ({"n_modes": 2, "g": [1.0], "omega_modes": 1.0, "delta": 0, "manifolds": [[0, 0]],
      "delta_over_g_grid": [0]}, "list of 2"),
    (dict(MODEL, delta_over_g_grid=[0]), "manifolds"),
    (dict(MODEL, g=-1.0, manifolds=[[0, 0]], delta_over_g_grid=[0]), "non-positive coupling"),
])
def test_config_errors(tmp_path, capsys, cfg, msg):
    assert run(tmp_path, "spectrum", cfg) == cli.EXIT_CONFIG
    assert msg in capsys.readouterr().err


def test_bad_json_and_command_mismatch(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["spectrum", "--config", str(bad), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["dynamics", "--recipe", "fig1", "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(dict(MODEL, manifolds=[[0, 0]], delta_over_g_grid=[0])))
    assert cli.main(["spectrum", "--config", str(cfg), "--out", str(blocker / "sub")]) == cli.EXIT_IO


def test_numeric_error_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise mf.NoBracketError("forced")
    monkeypatch.setattr(mf, "phase_diagram", boom)
    assert run(tmp_path, "phase-diagram", None, "--recipe", "fig3") == cli.EXIT_NUMERIC


DYN = dict(MODEL, nbar=[2.0, 1.0], gt_min=0.0, gt_max=10.0, gt_points=51)


def test_dynamics_columns_and_seed_independence(tmp_path):
    assert run(tmp_path, "dynamics", DYN, "--seed", "1", name="a") == 0
    assert run(tmp_path, "dynamics", DYN, "--seed", "2", name="b") == 0
    a = (tmp_path / "a" / "dynamics.csv").read_bytes()
    assert a == (tmp_path / "b" / "dynamics.csv").read_bytes()
    table = rows(tmp_path / "a" / "dynamics.csv")
    assert table[0] == ["gt", "P1", "n_mean_1", "n_mean_2", "g_n"]
    assert len(table) == 52


def test_monte_carlo_adds_stderr_and_is_seeded(tmp_path):
    cfg = dict(DYN, sampler="monte_carlo", samples=2000)
    assert run(tmp_path, "dynamics", cfg, "--seed", "5", name="a") == 0
    assert run(tmp_path, "dynamics", cfg, "--seed", "5", name="b") == 0
    assert run(tmp_path, "dynamics", cfg, "--seed", "6", name="c") == 0
    a = (tmp_path / "a" / "dynamics.csv").read_bytes()
    assert a == (tmp_path / "b" / "dynamics.csv").read_bytes()
    assert a != (tmp_path / "c" / "dynamics.csv").read_bytes()
    assert rows(tmp_path / "a" / "dynamics.csv")[0][-1] == "stderr"


def test_fock_smoke_is_pure_sinusoid(tmp_path):
    import math
    cfg = dict(MODEL, delta=0.0, fock_occupations=[2, 3], atom_init="ground",
               gt_min=0.0, gt_max=3.0, gt_points=31)
    assert run(tmp_path, "dynamics", cfg) == 0
    # time is g_eff t; a ground atom couples with g_eff sqrt(prod n)
    for gt, p1, *_ in rows(tmp_path / "out" / "dynamics.csv")[1:]:
        assert float(p1) == pytest.approx(math.sin(math.sqrt(6) * float(gt)) ** 2, abs=1e-12)


PD = {"n_modes": 3, "g": 1.0, "omega_modes": 10.0, "delta": 0.0, "z": 3, "kappa": 1.0 / 900.0}


def test_single_cell_phase_diagram(tmp_path):
    cfg = dict(PD, delta_bar_grid=[0.0], mu_bar_grid=[2800.0])
    assert run(tmp_path, "phase-diagram", cfg) == 0
    table = rows(tmp_path / "out" / "phase_diagram.csv")
    assert table == [["delta_bar", "mu_bar", "label"], ["0", "2800", "MI1"]]
    bounds = rows(tmp_path / "out" / "boundaries.csv")
    assert bounds[0] == ["m_k", "delta_bar", "mu_plus", "mu_minus"]
    assert [r[0] for r in bounds[1:]] == ["0", "1", "2", "3"]


def test_pole_cell_flagged_and_run_completes(tmp_path):
    from mmjc.core import ModelParams
    sp = mf.ScaledPhaseParams(3, 1.0 / 900.0)
    pole = mf.SecondOrder(sp, ModelParams.equal(3, 1.0, 10.0, 0.0), 1).lower_pole
    cfg = dict(PD, delta_bar_grid=[0.0], mu_bar_grid=[pole - 1, pole, pole + 1])
    assert run(tmp_path, "phase-diagram", cfg) == 0
    labels = [r[2] for r in rows(tmp_path / "out" / "phase_diagram.csv")[1:]]
    assert labels[1] == "POLE"
    side = json.loads((tmp_path / "out" / "phase-diagram.json").read_text())
    assert side["diagnostics"]["run"]["pole_cells"] == 1


def test_validate_quick_passes_and_reports(tmp_path, capsys):
    assert run(tmp_path, "validate", {"quick": True}) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == len(cli.validation.CHECKS)
    assert "max deviation" in out
    side = json.loads((tmp_path / "out" / "validate.json").read_text())
    assert all(c["passed"] for c in side["checks"])


def test_validate_corrupted_tolerance_names_check(tmp_path, capsys):
    cfg = {"quick": True, "tolerances": {"eigenvalues": 1e-30}}
    assert run(tmp_path, "validate", cfg) == cli.EXIT_VALIDATION
    captured = capsys.readouterr()
    assert "FAIL  eigenvalues vs dense manifold block" in captured.out
    assert "eigenvalues vs dense manifold block" in captured.err


def test_threads_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MMJC_THREADS", "1")
    cfg = dict(MODEL, manifolds=[[0, 0]], delta_over_g_grid=[0])
    assert run(tmp_path, "spectrum", cfg) == 0
    assert json.loads((tmp_path / "out" / "spectrum.json").read_text())["config"]["threads"] == 1
    monkeypatch.setenv("MMJC_THREADS", "many")
    assert run(tmp_path, "spectrum", cfg) == cli.EXIT_CONFIG
