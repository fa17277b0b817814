import json
import os

import numpy as np
import pytest

from flowlab.cli import main
from flowlab.config import ConfigError, load_config

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")
HEAT_STEP = os.path.join(CONFIG_DIR, "heat-step.cfg")
CSF_CREN = os.path.join(CONFIG_DIR, "csf-crenellated.cfg")


def _write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


MINIMAL = """
[flow]
id = heat
c = 0.25

[grid]
x_lo = 0.0
x_hi = 6.283185307179586
n_cells = 64
topology = periodic

[initial]
kind = sin
amplitude = 1.0

[plan]
t_end = 0.05
output_times = 0.05
"""


# --- config loading ---------------------------------------------------------


def test_load_bundled_configs():
    cfg = load_config(HEAT_STEP)
    assert cfg.flow_id == "heat"
    assert cfg.grid.n_cells == 256
    assert "zero-counting" in cfg.checks
    cfg2 = load_config(CSF_CREN)
    assert cfg2.bc_kind == "periodic"
    assert cfg2.checks["double-coordinate"]["region"] == "G"


def test_config_error_paths(tmp_path):
    with pytest.raises(ConfigError, match=r"\(file\)"):
        load_config(str(tmp_path / "missing.cfg"))
    with pytest.raises(ConfigError, match="flow.id"):
        load_config(_write(tmp_path, MINIMAL.replace("id = heat", "id = wave")))
    with pytest.raises(ConfigError, match="initial.kind"):
        load_config(_write(tmp_path, MINIMAL.replace("kind = sin", "kind = noise")))
    with pytest.raises(ConfigError, match="plan.output_times"):
        load_config(_write(tmp_path, MINIMAL.replace(
            "output_times = 0.05", "output_times = 0.2")))
    bad_check = MINIMAL + "\n[check:x]\ntype = telepathy\n"
    with pytest.raises(ConfigError, match="check:x.type"):
        load_config(_write(tmp_path, bad_check))


def test_build_initial_kinds(tmp_path):
    for kind, extra in [("sin", "frequency = 2.0"), ("cos", ""),
                        ("abspow", "exponent = 0.5"), ("zigzag", "period = 1.0"),
                        ("step", "eps = 0.1"), ("crenel", "R = 2.0"),
                        ("cone", "slope = 2.0")]:
        text = MINIMAL.replace("kind = sin\namplitude = 1.0",
                               f"kind = {kind}\n{extra}")
        cfg = load_config(_write(tmp_path, text, f"{kind}.cfg"))
        u0 = cfg.build_initial()
        assert np.all(np.isfinite(u0.values))


# --- run --------------------------------------------------------------------


def test_run_heat_step(tmp_path):
    out = str(tmp_path / "out")
    assert main(["run", HEAT_STEP, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "manifest.json"))
    assert os.path.exists(os.path.join(out, "summary.txt"))
    assert os.path.exists(os.path.join(out, "reports", "zero-counting.json"))
    assert os.path.exists(os.path.join(out, "fields", "t=0.05.csv"))
    with open(os.path.join(out, "reports", "zero-counting.json")) as fh:
        rep = json.load(fh)
    assert rep["passed"] is True
    summary = open(os.path.join(out, "summary.txt")).read()
    assert "PASS" in summary


def test_run_csf_crenellated(tmp_path):
    out = str(tmp_path / "out")
    assert main(["run", CSF_CREN, "--out", out]) == 0
    with open(os.path.join(out, "reports", "double-coordinate.json")) as fh:
        rep = json.load(fh)
    assert rep["max_defect"] <= 0.0  # strict certificate at c = 1/4


def test_run_byte_identical(tmp_path):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["run", HEAT_STEP, "--out", out1]) == 0
    assert main(["run", HEAT_STEP, "--out", out2]) == 0
    for sub in ("manifest.json", "summary.txt",
                os.path.join("reports", "zero-counting.json"),
                os.path.join("fields", "t=0.05.csv")):
        a = open(os.path.join(out1, sub), "rb").read()
        b = open(os.path.join(out2, sub), "rb").read()
        assert a == b, sub


def test_run_assert_vs_report_only(tmp_path):
    # tighten the tolerance so the asserted check fails
    text = open(HEAT_STEP).read().replace("rel_tol = 0.05", "rel_tol = 0.001")
    cfg = _write(tmp_path, text, "strict.cfg")
    assert main(["run", cfg, "--out", str(tmp_path / "o1")]) == 1
    assert main(["run", cfg, "--report-only", "--out", str(tmp_path / "o2")]) == 0


def test_run_config_error_exit(tmp_path):
    cfg = _write(tmp_path, MINIMAL.replace("id = heat", "id = wave"))
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 2


# --- sweep --------------------------------------------------------------------


def test_sweep(tmp_path):
    cfg = _write(tmp_path, MINIMAL)
    out = str(tmp_path / "sweep")
    assert main(["sweep", cfg, "--grid", "grid.n_cells=32,64", "--out", out]) == 0
    rows = open(os.path.join(out, "sweep.csv")).read().strip().splitlines()
    assert rows[0] == "label,exit_code"
    assert len(rows) == 3
    assert os.path.exists(os.path.join(out, "n_cells=32", "manifest.json"))


# --- certify / list -------------------------------------------------------------


def test_certify_norm(tmp_path):
    out = str(tmp_path / "c")
    assert main(["certify", "euclid", "--out", out]) == 0
    with open(os.path.join(out, "certificate-euclid.json")) as fh:
        cert = json.load(fh)
    assert cert["A"] == pytest.approx(0.5, abs=1e-3)


def test_certify_flow(tmp_path):
    out = str(tmp_path / "c")
    assert main(["certify", "csf", "--out", out]) == 0
    # q < 0 regularized p-laplacian fails its degeneracy certificate
    assert main(["certify", "plaplace-reg", "--out", out]) == 1


def test_certify_unknown_id(tmp_path):
    assert main(["certify", "octagon", "--out", str(tmp_path / "c")]) == 2


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert "csf" in out and "euclid" in out and "double_coordinate" in out
