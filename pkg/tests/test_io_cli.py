import json

import numpy as np
import pytest
from click.testing import CliRunner

from cvoptomech.cli import main
from cvoptomech.errors import ConfigParse, DimensionMismatch
from cvoptomech.gaussian import Convention, GaussianState, two_mode_squeezed_cm
from cvoptomech.io import (
    DUAL_KEYS,
    SINGLE_KEYS,
    config_hash,
    format_cm,
    parse_cm,
    parse_config,
    write_cm,
)

SINGLE = "configs/single_stokes.cfg"
DUAL = "configs/dual_balanced.cfg"
BASE = open(SINGLE).read()


@pytest.fixture
def runner():
    return CliRunner()


def run(runner, *args):
    return runner.invoke(main, [str(a) for a in args])


# -- CM files ------------------------------------------------------------------


def test_cm_round_trip():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(4, 4))
    state = GaussianState(X @ X.T + np.eye(4), rng.normal(size=4), Convention.HALF)
    back = parse_cm(format_cm(state))
    assert back.convention is Convention.HALF
    np.testing.assert_array_equal(back.cm, state.cm)
    np.testing.assert_array_equal(back.d, state.d)


def test_cm_parse_errors():
    with pytest.raises(ConfigParse):
        parse_cm("")
    with pytest.raises(ConfigParse):
        parse_cm("modes=x\n1 0\n0 1\n")
    with pytest.raises(DimensionMismatch):
        parse_cm("modes=2\n1 0\n0 1\n")
    with pytest.raises(DimensionMismatch):
        parse_cm("modes=1\n1 0 0\n0 1 0\n")
    with pytest.raises(ConfigParse):
        parse_cm("modes=1\n1 a\n0 1\n")


# -- config parsing ------------------------------------------------------------------


def test_config_precedence_and_defaults():
    text = BASE.replace("detuning_mode = effective\n", "")
    cfg = parse_config(text, SINGLE_KEYS, ["power_w=0.01"])
    assert cfg["power_w"] == 0.01
    assert cfg["detuning_mode"] == "effective"
    assert cfg["filter_shape"] == "step"
    assert cfg["Q"] == 1e5


def test_config_errors():
    with pytest.raises(ConfigParse, match="unknown"):
        parse_config(BASE + "bogus = 1\n", SINGLE_KEYS)
    with pytest.raises(ConfigParse, match="missing"):
        parse_config(BASE.replace("Q = 1e5\n", ""), SINGLE_KEYS)
    with pytest.raises(ConfigParse):
        parse_config(BASE, SINGLE_KEYS, ["power_w"])
    with pytest.raises(ConfigParse):
        parse_config(BASE, SINGLE_KEYS, ["power_w=lots"])
    with pytest.raises(ConfigParse):
        parse_config(BASE, DUAL_KEYS)


def test_config_hash_stable_and_sensitive():
    a = parse_config(BASE, SINGLE_KEYS)
    b = parse_config(BASE, SINGLE_KEYS)
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 64
    assert config_hash(a) != config_hash(parse_config(BASE, SINGLE_KEYS, ["power_w=0.01"]))


# -- CLI -------------------------------------------------------------------------


def test_report_operating_point(runner):
    res = run(runner, "report", SINGLE)
    assert res.exit_code == 0
    rec = json.loads(res.output)
    assert rec["derived"]["G_over_omega_m"] == pytest.approx(0.41, rel=0.03)
    assert rec["stability"]["eigen_stable"]
    assert np.asarray(rec["steady_cm"]).shape == (4, 4)
    assert rec["metrics"]["E_N_intracavity"] > 0


def test_report_without_drive(runner):
    rec = json.loads(run(runner, "report", SINGLE, "--set", "power_w=0").output)
    nbar = rec["derived"]["nbar"]
    assert rec["metrics"]["E_N_intracavity"] == 0.0
    assert rec["metrics"]["n_eff"] == pytest.approx(nbar, rel=1e-9)


def test_report_unstable_point_exits_2(runner):
    res = run(runner, "report", SINGLE, "--set", "detuning_over_omega_m=-1",
              "--set", "power_w=0.2")
    assert res.exit_code == 2
    rec = json.loads(res.output)
    assert not rec["stability"]["eigen_stable"]
    assert "metrics" not in rec


def test_report_input_errors_exit_1(runner, tmp_path):
    assert run(runner, "report", tmp_path / "missing.cfg").exit_code == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text(BASE + "colour = blue\n")
    assert run(runner, "report", bad).exit_code == 1


def test_report_writes_out_file(runner, tmp_path):
    out = tmp_path / "r.json"
    assert run(runner, "report", SINGLE, "--out", out).exit_code == 0
    assert json.loads(out.read_text())["provenance"]["seed"] == 0


def test_teleport_tms(runner, tmp_path):
    path = tmp_path / "tms.cm"
    write_cm(path, GaussianState(two_mode_squeezed_cm(1.0), convention=Convention.ONE))
    res = run(runner, "teleport", path)
    assert res.exit_code == 0
    rec = json.loads(res.output)
    assert rec["F_opt"] == pytest.approx(0.7310585786300049, abs=1e-12)
    assert rec["E_N"] == pytest.approx(1.0, abs=1e-12)


def test_teleport_separable_and_bad_file(runner, tmp_path):
    path = tmp_path / "vac.cm"
    write_cm(path, GaussianState(np.eye(4), convention=Convention.ONE))
    rec = json.loads(run(runner, "teleport", path).output)
    assert rec["F_opt"] == 0.5 and rec["map"] is None
    bad = tmp_path / "bad.cm"
    bad.write_text("modes=2\n1 0\n")
    assert run(runner, "teleport", bad).exit_code == 1
    assert run(runner, "teleport", tmp_path / "none.cm").exit_code == 1


def test_membrane_command(runner):
    res = run(runner, "membrane", "--half-length", 0.05, "--q0", 1e-7,
              "--reflectivity", 0.8, "--mode", 94000)
    assert res.exit_code == 0
    rec = json.loads(res.output)
    assert rec["omega_plus"] > rec["omega_minus"]
    assert rec["inputs"]["T"] == pytest.approx(0.2)
    bad = run(runner, "membrane", "--half-length", 0.05, "--q0", 1e-7,
              "--reflectivity", 1.5, "--mode", 94000)
    assert bad.exit_code == 1


def test_single_point_sweep_matches_report(runner):
    rep = json.loads(run(runner, "report", SINGLE).output)
    res = run(runner, "sweep", SINGLE, "--axis1", "power_w:0.03:0.03:1", "--allow-single")
    assert res.exit_code == 0
    header, row = res.output.strip().splitlines()
    values = dict(zip(header.split(","), row.split(",")))
    assert float(values["E_N_intracavity"]) == rep["metrics"]["E_N_intracavity"]
    assert run(runner, "sweep", SINGLE, "--axis1", "power_w:0.03:0.03:1").exit_code == 2


def test_sweep_axis_validation(runner):
    assert run(runner, "sweep", SINGLE, "--axis1", "power_w:0:1").exit_code == 2
    assert run(runner, "sweep", SINGLE, "--axis1", "colour:0:1:3").exit_code == 2
    assert run(runner, "sweep", SINGLE, "--axis1", "power_w:0:1:3:log").exit_code == 2


def test_filter_centre_sweep_peaks_at_stokes(runner):
    res = run(runner, "sweep", SINGLE, "--axis1", "filter_omega_over_omega_m:-2:2:21",
              "--metric", "E_N_output")
    assert res.exit_code == 0
    lines = res.output.strip().splitlines()
    cols = lines[0].split(",")
    rows = [dict(zip(cols, ln.split(","))) for ln in lines[1:]]
    best = max(rows, key=lambda r: float(r["E_N_output_0"]))
    assert float(best["filter_omega_over_omega_m"]) == pytest.approx(-1.0)


def test_log_axis_two_dimensional(runner):
    res = run(runner, "sweep", SINGLE, "--axis1", "power_w:1e-3:3e-2:3:log",
              "--axis2", "temperature_k:0.1:0.4:2")
    lines = res.output.strip().splitlines()
    assert len(lines) == 1 + 6
    assert lines[1].startswith("0.001,0.1,")
    assert lines[2].startswith("0.001,0.4,")


def test_dual_report_and_sweep(runner):
    res = run(runner, "dual-report", DUAL, "--metrics", "E_N_intracavity,E_N_output")
    assert res.exit_code == 0
    m = json.loads(res.output)["metrics"]
    assert m["E_N_output_mirror_b"] > m["E_N_output_mirror_a"]
    sw = run(runner, "dual-sweep", DUAL, "--axis1", "laser_b_power_w:0:0.013:3")
    assert sw.exit_code == 0
    lines = sw.output.strip().splitlines()
    assert len(lines) == 4 and lines[0].startswith("laser_b_power_w,")
    assert all(ln.endswith(",1") for ln in lines[1:])
