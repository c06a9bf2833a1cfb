import json
import os

import numpy as np
import pytest

from kgsys.cli import (EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK, ConfigError,
                       load_config, main, run_scenario)
from kgsys.functionals import FieldPair, NonlinearityParams, PhasePoint
from kgsys.sampling import gaussian_bump
from kgsys.spectral import make_grid, write_field_snapshot, zero_field


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_load_config_rejects_unknown_key(tmp_path):
    path = _write(tmp_path, "c.yaml", """
kind: single_run
output_dir: out
wibble: 3
""")
    with pytest.raises(ConfigError, match="config.wibble"):
        load_config(path)


def test_load_config_rejects_nested_unknown_key(tmp_path):
    path = _write(tmp_path, "c.yaml", """
kind: single_run
output_dir: out
params: {beta: 1.0, gamma: 2.0}
""")
    with pytest.raises(ConfigError, match="config.params.gamma"):
        load_config(path)


def test_load_config_rejects_bad_kind_and_mismatch(tmp_path):
    bad = _write(tmp_path, "bad.yaml", "kind: waffle\noutput_dir: out\n")
    with pytest.raises(ConfigError, match="kind"):
        load_config(bad)
    mismatch = _write(tmp_path, "mm.yaml", """
kind: single_run
output_dir: out
profile_test: {n_count: 4}
""")
    with pytest.raises(ConfigError, match="does not match"):
        load_config(mismatch)


def test_load_config_requires_output_dir(tmp_path):
    path = _write(tmp_path, "c.yaml", "kind: single_run\n")
    with pytest.raises(ConfigError, match="output_dir"):
        load_config(path)


def test_load_config_type_errors(tmp_path):
    path = _write(tmp_path, "c.yaml", """
kind: single_run
output_dir: out
seed: maybe
""")
    with pytest.raises(ConfigError, match="config.seed"):
        load_config(path)


def test_main_config_error_exit_code(tmp_path, capsys):
    path = _write(tmp_path, "c.yaml", "kind: single_run\nnope: 1\n")
    assert main(["run", path]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_empty_dichotomy_ensemble(tmp_path):
    out = tmp_path / "out"
    path = _write(tmp_path, "c.yaml", f"""
kind: dichotomy_ensemble
output_dir: {out}
dichotomy_ensemble: {{n_members: 0}}
""")
    assert run_scenario(path) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["kind"] == "dichotomy_ensemble"
    assert len(manifest["config_hash"]) == 64
    summary = json.loads((out / "dichotomy_summary.json").read_text())
    assert summary["members"] == 0
    assert not (out / "FAILED").exists()
    csv = (out / "dichotomy.csv").read_text().splitlines()
    assert csv[0].startswith("# config_hash: ")
    assert csv[1].startswith("index,expected,")


def test_single_run_scenario_and_determinism(tmp_path):
    out = tmp_path / "out"
    path = _write(tmp_path, "c.yaml", f"""
kind: single_run
output_dir: {out}
grid: {{dim: 1, points: 128, box_half_length: 12.0}}
policy: {{dt_base: 0.01, diag_stride: 10}}
single_run: {{horizon: 1.0, amplitude1: 0.3, amplitude2: 0.2,
              max_energy_drift: 1.0e-4}}
""")
    assert run_scenario(path) == EXIT_OK
    first = (out / "functionals.csv").read_bytes()
    lines = first.decode().splitlines()
    assert lines[1] == "t,E,J,K0,K2,P0"
    # 10 significant digits on data rows
    assert any(len(tok.split("e")[0].replace("-", "").replace(".", "")) >= 9
               for tok in lines[3].split(","))
    assert run_scenario(path) == EXIT_OK
    assert (out / "functionals.csv").read_bytes() == first
    from kgsys.spectral import read_field_snapshot
    fields = read_field_snapshot(out / "final_state.kgdu")
    assert len(fields) == 4
    checks = json.loads((out / "checks.json").read_text())
    assert checks == {"completed": True, "energy_drift": True}


def test_single_run_check_failure_writes_sentinel(tmp_path):
    out = tmp_path / "out"
    path = _write(tmp_path, "c.yaml", f"""
kind: single_run
output_dir: {out}
grid: {{dim: 1, points: 128, box_half_length: 12.0}}
single_run: {{horizon: 1.0, amplitude1: 0.3, max_energy_drift: 1.0e-18}}
""")
    assert run_scenario(path) == EXIT_CHECK_FAILED
    assert (out / "FAILED").exists()
    assert "energy_drift: FAIL" in (out / "FAILED").read_text()


def test_profile_test_scenario(tmp_path):
    out = tmp_path / "out"
    path = _write(tmp_path, "c.yaml", f"""
kind: profile_test
output_dir: {out}
profile_test: {{n_count: 8}}
""")
    assert run_scenario(path) == EXIT_OK
    rows = (out / "bubbles.csv").read_text().splitlines()
    assert rows[1] == "index,block,nu,energy_sq"
    assert len(rows) == 4          # comment + header + two bubbles
    checks = json.loads((out / "checks.json").read_text())
    assert checks["bubbles_recovered"]


def test_perturbation_study_scenario(tmp_path):
    out = tmp_path / "out"
    path = _write(tmp_path, "c.yaml", f"""
kind: perturbation_study
output_dir: {out}
policy: {{dt_base: 0.005, diag_stride: 20, snapshot_stride: 40}}
perturbation_study: {{deltas: [1.0e-4, 1.0e-3, 1.0e-2], n_directions: 1,
                      horizon: 2.0}}
""")
    assert run_scenario(path) == EXIT_OK
    summary = json.loads((out / "perturbation_summary.json").read_text())
    assert 0.9 <= float(summary["exponent"]) <= 1.1


def test_groundstate_sweep_scenario(tmp_path):
    out = tmp_path / "out"
    path = _write(tmp_path, "c.yaml", f"""
kind: groundstate_sweep
output_dir: {out}
grid: {{dim: 3, points: 32, box_half_length: 12.0}}
groundstate_sweep: {{betas: [0.0, 1.0, 2.0]}}
""")
    assert run_scenario(path) == EXIT_OK
    table = json.loads((out / "sweep.json").read_text())
    assert len(table["rows"]) == 3
    levels = [float(r["level"]) for r in table["rows"]]
    # oracle: levels scale like 2 J / (1 + beta) once the coupled branch wins
    assert levels[0] == pytest.approx(18.897, rel=0.25)
    assert levels[1] <= levels[0] and levels[2] <= levels[1]
    checks = json.loads((out / "checks.json").read_text())
    assert checks["levels_nonincreasing"]


def test_classify_subcommand(tmp_path, capsys):
    g = make_grid(1, 64, 12.0)
    pair = FieldPair(gaussian_bump(g, 0.2, 1.5), gaussian_bump(g, 0.1, 1.5))
    snap = tmp_path / "phase.kgdu"
    write_field_snapshot(snap, [pair.u1, pair.u2, zero_field(g),
                                zero_field(g)])
    assert main(["classify", str(snap), "--beta", "1.0"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["region"] == "PS_plus"
    assert float(out["h0"]) > 0


def test_classify_subcommand_rejects_wrong_field_count(tmp_path, capsys):
    g = make_grid(1, 64, 12.0)
    snap = tmp_path / "phase.kgdu"
    write_field_snapshot(snap, [zero_field(g)])
    assert main(["classify", str(snap)]) == EXIT_CONFIG


def test_groundstate_subcommand(capsys):
    code = main(["groundstate", "--beta", "0.0", "--points", "32",
                 "--box", "12.0"])
    assert code == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    # the 32^3 grid level carries a resolution bias; h0 stays near the oracle
    assert float(out["h0"]) == pytest.approx(18.897, rel=0.25)
    assert float(out["h0"]) <= float(out["candidates"]["semitrivial"]) + 1e-9
    assert out["kind"] in ("semitrivial", "symmetric")
