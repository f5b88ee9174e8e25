import json
import subprocess
import sys
from pathlib import Path

import pytest

from corner_moser.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_stokes_pass(tmp_path):
    cfg = write(tmp_path, '[domain]\nkind = "cube"\nm = 2\n[grid]\nn = 9\n[form]\ndy = "x"\n')
    assert main(["stokes", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "stokes_report.json").read_text())
    assert rep["passed"] and rep["results"][0]["residual"] <= 1e-12


def test_stokes_interior_bump(tmp_path):
    cfg = write(tmp_path, '[domain]\nkind = "cube"\nm = 2\n[grid]\nn = 33\n[form]\n'
                '"dx" = "exp(-1/(1 - 16*((x-0.5)^2 + (y-0.5)^2)))*0"\n"dy" = "sin(pi*x)^4*sin(pi*y)^4"\n')
    assert main(["stokes", "--config", cfg, "--out-dir", str(tmp_path)]) == 0


def test_malformed_expression(tmp_path):
    cfg = write(tmp_path, '[domain]\nkind = "cube"\nm = 2\n[grid]\nn = 9\n[form]\ndy = "2 *"\n')
    assert main(["stokes", "--config", cfg, "--out-dir", str(tmp_path)]) == 2


def test_tolerance_failure(tmp_path):
    cfg = write(tmp_path, '[domain]\nkind = "cube"\nm = 2\n[grid]\nn = 9\n[form]\ndx = "sin(3*x*y)"\n')
    assert main(["stokes", "--config", cfg, "--out-dir", str(tmp_path)]) == 1


def test_json_config_and_unknown_tolerance(tmp_path):
    cfg = write(tmp_path, json.dumps({"domain": {"kind": "cube", "m": 2}, "grid": {"n": 9}, "form": {"dy": "x"}}), "run.json")
    assert main(["stokes", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    cfg = write(tmp_path, '[domain]\nm = 1\n[grid]\nn = 9\n[form]\n"1" = "x"\n[tolerances]\nbogus = 1\n')
    assert main(["stokes", "--config", cfg, "--out-dir", str(tmp_path)]) == 2


def test_banyaga_check(tmp_path):
    cfg = str(CONFIGS / "banyaga_q22.toml")
    assert main(["banyaga-check", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "banyaga_check_report.json").read_text())
    assert rep["checks"] == {"identity": True, "trace": True, "linearity": True, "order": True}
    assert (tmp_path / "banyaga_I.csv").exists()


def test_match_1d_and_determinism(tmp_path):
    cfg = str(CONFIGS / "match_1d.toml")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["match", "--config", cfg, "--out-dir", str(a)]) == 0
    assert main(["match", "--config", cfg, "--out-dir", str(b), "--threads", "3"]) == 0
    rep = json.loads((a / "match_report.json").read_text())
    assert rep["oracle_error"] <= 1e-3
    assert (a / "match_map.csv").read_bytes() == (b / "match_map.csv").read_bytes()


def test_match_identity(tmp_path):
    cfg = write(tmp_path, '[domain]\nkind = "cube"\nm = 2\n[grid]\nn = 9\n[densities]\nmu0 = "1 + x"\nmu1 = "1 + x"\n')
    assert main(["match", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "match_report.json").read_text())
    assert rep["boundary_identity"]["max_displacement"] == 0


def test_match_mass_error(tmp_path):
    cfg = write(tmp_path, '[domain]\nm = 1\n[grid]\nn = 33\n[densities]\nmu0 = "1"\nmu1 = "2"\n')
    assert main(["match", "--config", cfg, "--out-dir", str(tmp_path)]) == 2


def test_convergence(tmp_path):
    cfg = write(tmp_path, '[convergence]\nstudies = ["stokes-affine", "banyaga-identity-q22"]\ngrids = [33, 65, 129]\n')
    assert main(["convergence", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    cfg = write(tmp_path, '[convergence]\nstudies = ["nope"]\n')
    assert main(["convergence", "--config", cfg, "--out-dir", str(tmp_path)]) == 2


def test_missing_config_file(tmp_path):
    assert main(["stokes", "--config", str(tmp_path / "none.toml")]) == 2


def test_usage_error():
    with pytest.raises(SystemExit):
        main(["frobnicate", "--config", "x"])


def test_console_entry_and_log_env(tmp_path):
    cfg = write(tmp_path, '[domain]\nkind = "cube"\nm = 3\n[grid]\nn = 5\n[form]\n"dy^dz" = "x"\n')
    out = subprocess.run(
        [sys.executable, "-m", "corner_moser", "stokes", "--config", cfg, "--out-dir", str(tmp_path)],
        capture_output=True, text=True, env={"CORNER_MOSER_LOG": "INFO", "PATH": ""},
    )
    assert out.returncode == 0
    assert "stokes: pass" in out.stdout and "wrote" in out.stderr
