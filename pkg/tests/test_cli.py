import json
import math
import subprocess
import sys
from importlib.resources import files

import pytest

from nonlocal_bvp import cli, radial_oracle as O

DATA = files("nonlocal_bvp").joinpath("data")


def _cfg(name):
    return str(DATA.joinpath(name))


def _run(argv, capsys):
    code = cli.main(argv)
    return code, capsys.readouterr()


def test_oracle_example2_root(capsys):
    code, out = _run(["oracle", "--example", "2", "--c0", "critical", "--lambda", "7.2831853"], capsys)
    assert code == 0
    d = json.loads(out.out)
    assert abs(d["det"]) <= 1e-9
    assert d["C0"] == O.critical_c0()
    assert d["s0"][:2] == [4.355890089177974, 7.283185307179586]


def test_oracle_example1(capsys, tmp_path):
    code, out = _run(["oracle", "--example", "1", "--lambda", "3.0", "--write", "--out", str(tmp_path)], capsys)
    assert code == 0
    d = json.loads((tmp_path / "oracle.json").read_text())
    assert d == json.loads(out.out)
    assert d["lambda_star"] == pytest.approx(math.log(2 + math.sqrt(3)), abs=1e-12)
    assert d["classification"] == "Unique"


def test_oracle_bad_c0(capsys):
    code, out = _run(["oracle", "--example", "2", "--c0", "lots", "--lambda", "3"], capsys)
    assert code == 2


def test_capacity(capsys, tmp_path):
    code, out = _run(["capacity", "--config", _cfg("annulus12.toml"), "--out", str(tmp_path)], capsys)
    assert code == 0
    d = json.loads((tmp_path / "capacity.json").read_text())
    assert d["analytic_value"] == pytest.approx(2 * math.pi / math.log(2), rel=1e-15)
    assert abs(d["fem_value"] - 9.06472) / 9.06472 <= 1e-2


def test_classify(capsys, tmp_path):
    code, out = _run(["classify", "--config", _cfg("ex2.toml"), "--lambda", "6.0", "--out", str(tmp_path)], capsys)
    assert code == 0
    d = json.loads((tmp_path / "classify.json").read_text())
    assert d["classification"] == "Unique"
    assert set(d) >= {"det", "C_psi_det", "classification", "B"}
    assert d["det"] == pytest.approx(O.example2_det(6.0), abs=1e-8)


def test_solve_writes_field(capsys, tmp_path):
    code, _ = _run(["solve", "--config", _cfg("multihole.toml"), "--out", str(tmp_path)], capsys)
    assert code == 0
    rep = json.loads((tmp_path / "solve_report.json").read_text())
    assert rep["classification"] == "Unique"
    assert rep["fixed_point_residual"] <= 1e-9
    lines = (tmp_path / "solution.csv").read_text().splitlines()
    assert lines[0] == "node,x,y,value"
    assert len(lines) > 100


def test_sweep_byte_identical(capsys, tmp_path):
    outs = []
    for d in ("a", "b"):
        argv = ["sweep", "--config", _cfg("ex2.toml"), "--lambda-min", "2", "--lambda-max", "8",
                "--steps", "50", "--out", str(tmp_path / d)]
        code, out = _run(argv, capsys)
        assert code == 0
        outs.append([(tmp_path / d / n).read_bytes() for n in ("sweep.csv", "sweep.json", "roots.csv")])
    assert outs[0] == outs[1]
    roots = [float(v) for v in outs[0][2].decode().split()[1:]]
    assert roots == pytest.approx(O.s0_set(1), abs=1e-6)


def test_config_error_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(DATA.joinpath("annulus12.toml").read_text().replace("nr = 4", "nr = -4"))
    code, out = _run(["classify", "--config", str(bad), "--out", str(tmp_path)], capsys)
    assert code == 2
    assert f"{bad}:" in out.err
    assert not (tmp_path / "classify.json").exists()


def test_missing_config_exit_2(capsys, tmp_path):
    code, _ = _run(["classify", "--config", str(tmp_path / "nope.toml")], capsys)
    assert code == 2


def test_numeric_failure_exit_3(capsys, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(DATA.joinpath("annulus12.toml").read_text().replace('h = "1"', 'h = "1 + sqrt(1.5 - r)"'))
    code, out = _run(["classify", "--config", str(bad), "--out", str(tmp_path)], capsys)
    assert code == 3
    assert "numerical failure" in out.err


def test_verify_single_criterion(capsys):
    code, out = _run(["verify", "--only", "3"], capsys)
    assert code == 0
    assert "[PASS] criterion 3" in out.out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "nonlocal_bvp", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "sweep" in res.stdout
