import csv
import io
import json
import subprocess
import sys

import pytest

from burgers_blowup.cli import main
from burgers_blowup.scenario_io import dumps_scenario
from burgers_blowup.scenarios import PerturbationSpec, Scenario

from conftest import BUNDLED


def rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.fixture
def pure_two_file(tmp_path):
    sc = Scenario(name="pure_two", i_list=(1, 1), perturbation=PerturbationSpec(shape="none"),
                  n_s=4, n_track=2)
    path = tmp_path / "pure_two.cfg"
    path.write_text(dumps_scenario(sc))
    return path


def test_profile_table(capsys):
    assert main(["profile", "--i", "1", "--range", "-10", "10", "--n", "5"]) == 0
    table = rows(capsys.readouterr().out)
    assert table[0] == ["X", "Psi", "dPsi", "d2Psi", "Psi_small_series", "Psi_large_asymptotic"]
    assert len(table) == 6
    assert [float(v) for v in table[3][:4]] == [0.0, 0.0, -1.0, 0.0]
    assert "-0.0" not in table[3]


def test_profile_known_value(capsys, tmp_path):
    out = tmp_path / "p.csv"
    assert main(["profile", "--i", "1", "--range", "-2", "2", "--n", "5", "--output", str(out)]) == 0
    last = rows(out.read_text())[-1]
    assert float(last[0]) == 2.0 and float(last[1]) == pytest.approx(-1.0, abs=1e-15)


@pytest.mark.parametrize("argv", [
    ["profile", "--i", "0"],
    ["profile", "--n", "1"],
    ["profile", "--range", "3", "1"],
    ["profile", "--range", "nan", "1"],
    ["frobnicate"],
    [],
])
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == 2


def test_verify_bundled_passes(tmp_path, capsys):
    assert main(["verify", str(BUNDLED), "--output-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "verdict: pass" in out
    (verdict,) = tmp_path.glob("two_bump_i11-*.json")
    assert json.loads(verdict.read_text())["verdict"] == "pass"
    assert list(tmp_path.glob("two_bump_i11-*-ledger.csv"))


def test_verify_large_delta_fails_with_named_monitors(tmp_path, capsys):
    code = main(["verify", str(BUNDLED), "--override", "delta=0.5", "--output-dir", str(tmp_path)])
    err = capsys.readouterr().err
    assert code == 1
    assert "FAILED delta-small" in err
    assert "FAILED regular-over-run" in err


@pytest.mark.parametrize("override", ["perturbation.center=1.6", "bogus=1", "q=0", "delta=x"])
def test_verify_configuration_errors(override, tmp_path):
    assert main(["verify", str(BUNDLED), "--override", override, "--output-dir", str(tmp_path)]) == 2


def test_verify_missing_or_malformed_file(tmp_path):
    assert main(["verify", str(tmp_path / "missing.cfg")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("[scenario]\ndelta = 1e-4\n[mystery]\nx = 1\n")
    assert main(["verify", str(bad)]) == 2


def test_sweep_empty_axis(pure_two_file, tmp_path, capsys):
    assert main(["sweep", str(pure_two_file), "--axis", "delta=", "--output-dir", str(tmp_path)]) == 0
    (scaling,) = tmp_path.glob("*-scaling.csv")
    assert len(rows(scaling.read_text())) == 1


def test_sweep_delta_slope(pure_two_file, tmp_path, capsys):
    code = main(["sweep", str(pure_two_file), "--axis", "delta=1e-3,1e-4,1e-5,1e-6,1e-7",
                 "--output-dir", str(tmp_path)])
    assert code == 0
    (scaling,) = tmp_path.glob("*-scaling.csv")
    table = rows(scaling.read_text())
    slope, expected = float(table[1][4]), float(table[1][5])
    assert expected == pytest.approx(1 / 6)
    assert abs(slope / expected - 1) < 0.15


def test_sweep_isolates_failing_point(pure_two_file, tmp_path, capsys):
    code = main(["sweep", str(pure_two_file), "--axis", "i_list=1 1;0 1", "--output-dir", str(tmp_path)])
    assert code == 1
    assert "FAILED point" in capsys.readouterr().err
    (points,) = tmp_path.glob("*-points.csv")
    verdicts = [r[2] for r in rows(points.read_text())[1:]]
    assert verdicts == ["pass", "error"]


def test_sweep_bad_axis(pure_two_file):
    assert main(["sweep", str(pure_two_file), "--axis", "colour=red"]) == 2
    assert main(["sweep", str(pure_two_file), "--axis", "delta"]) == 2


def test_solve(capsys):
    assert main(["solve", str(BUNDLED), "--n", "11", "--s-offset", "1.0"]) == 0
    table = rows(capsys.readouterr().out)
    assert table[0] == ["x", "u", "ux"] and len(table) == 12


def test_simulate(pure_two_file, tmp_path, capsys):
    assert main(["simulate", str(pure_two_file), "--output-dir", str(tmp_path)]) == 0
    (frames,) = tmp_path.glob("pure_two-*-frames.csv")
    table = rows(frames.read_text())
    assert table[0][:3] == ["s", "X", "epsilon"] and len(table) == 1 + 4 * 256
    assert list(tmp_path.glob("pure_two-*-blowup.json"))


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "burgers_blowup", "profile", "--i", "2", "--n", "3"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and len(res.stdout.splitlines()) == 4
    res = subprocess.run([sys.executable, "-m", "burgers_blowup", "profile", "--i", "0"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 2 and "positive integer" in res.stderr
