import json
import subprocess
import sys

import pytest

from sumspace.cli import main

TWO_ATOM = {"n": 1, "atoms": [{"x": [0.0], "w": 1.0}, {"x": [1.0], "w": 1.0}]}
STEP = {"values": [0.0, 1.0]}


@pytest.fixture
def files(tmp_path):
    m = tmp_path / "m.json"
    f = tmp_path / "f.json"
    m.write_text(json.dumps(TWO_ATOM))
    f.write_text(json.dumps(STEP))
    return str(m), str(f), tmp_path


def run_cli(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_oracle_command(files, capsys):
    m, f, _ = files
    code, out, err = run_cli(["oracle", "--measure", m, "--function", f, "--p", "2"], capsys)
    assert code == 0
    assert out.strip() == "0.707106781"


def test_net_command(files, capsys, tmp_path):
    m, f, _ = files
    out_path = tmp_path / "net.json"
    code, _, _ = run_cli(
        ["net", "--measure", m, "--p", "2", "--out", str(out_path)], capsys
    )
    assert code == 0
    data = json.loads(out_path.read_text())
    assert "points" in data and "working_box" in data and "delta_grid" in data
    assert all(v["ok"] for v in data["verification"].values())


def test_whitney_command(files, capsys):
    m, f, _ = files
    code, out, _ = run_cli(["whitney", "--measure", m, "--p", "2"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["cubes"] and data["lacunae"]


def test_decompose_command(files, capsys):
    m, f, _ = files
    code, out, _ = run_cli(
        ["decompose", "--measure", m, "--function", f, "--p", "2"], capsys
    )
    assert code == 0
    data = json.loads(out)
    assert "seminorm" in data and "residual_norm" in data
    assert len(data["f2"]) == 2


def test_estimate_constant_function_zero(files, capsys, tmp_path):
    m, _, _ = files
    f = tmp_path / "const.json"
    f.write_text(json.dumps({"values": [3.0, 3.0]}))
    code, out, _ = run_cli(
        ["estimate", "--measure", m, "--function", str(f), "--p", "2"], capsys
    )
    assert code == 0
    data = json.loads(out)
    assert all(v == 0.0 for v in data["values"].values())


def test_kcurve_csv(files, capsys, tmp_path):
    m, f, _ = files
    out_path = tmp_path / "curve.csv"
    code, _, _ = run_cli(
        [
            "kcurve", "--measure", m, "--function", f, "--p", "2",
            "--t-grid", "0.3:10:2", "--format", "csv", "--out", str(out_path),
        ],
        capsys,
    )
    assert code == 0
    lines = out_path.read_text().strip().splitlines()
    assert lines[0] == "t,lower,upper,oracle"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert float(first[0]) == pytest.approx(0.3)
    assert float(first[3]) == pytest.approx(0.3, abs=1e-6)


def test_kcurve_csv_2d_empty_oracle(capsys, tmp_path):
    m = tmp_path / "m2.json"
    f = tmp_path / "f2.json"
    m.write_text(
        json.dumps(
            {
                "n": 2,
                "atoms": [
                    {"x": [0.0, 0.0], "w": 1.0},
                    {"x": [1.0, 0.5], "w": 2.0},
                ],
            }
        )
    )
    f.write_text(json.dumps({"values": [0.0, 1.0]}))
    code, out, _ = run_cli(
        [
            "kcurve", "--measure", str(m), "--function", str(f), "--p", "2.5",
            "--t-grid", "0.5:2:2", "--format", "csv",
        ],
        capsys,
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "t,lower,upper,oracle"
    assert all(line.endswith(",") for line in lines[1:])


def test_validate_family(files, capsys, tmp_path):
    m, f, _ = files
    fam = tmp_path / "fam.json"
    fam.write_text(json.dumps({"cubes": [{"c": [0.5], "r": 0.6}], "prime": [0], "dprime": [0]}))
    code, out, _ = run_cli(
        [
            "validate-family", "--measure", m, "--function", f, "--p", "2",
            "--family", str(fam),
        ],
        capsys,
    )
    assert code == 0
    data = json.loads(out)
    assert data["admissible"] is True
    assert data["value"] == pytest.approx(0.2076124567, abs=1e-9)


def test_validate_family_rejects(files, capsys, tmp_path):
    m, _, _ = files
    fam = tmp_path / "fam.json"
    fam.write_text(
        json.dumps(
            {
                "cubes": [{"c": [0.0], "r": 1.0}, {"c": [1.0], "r": 1.0}],
                "prime": [0, 1],
                "dprime": [0, 1],
            }
        )
    )
    code, out, _ = run_cli(
        ["validate-family", "--measure", m, "--p", "2", "--family", str(fam)], capsys
    )
    assert code == 2
    assert json.loads(out)["admissible"] is False


def test_input_errors(files, capsys, tmp_path):
    m, f, _ = files
    code, _, err = run_cli(["oracle", "--measure", m, "--function", f, "--p", "0.5"], capsys)
    assert code == 1
    code, _, err = run_cli(
        ["oracle", "--measure", str(tmp_path / "nope.json"), "--function", f, "--p", "2"],
        capsys,
    )
    assert code == 1
    code, _, _ = run_cli(["oracle", "--measure", m, "--function", f], capsys)
    assert code == 1


def test_selftest_deterministic_bytes(tmp_path):
    cmd = [sys.executable, "-m", "sumspace", "selftest", "--seed", "7"]
    r1 = subprocess.run(cmd, capture_output=True, cwd=tmp_path)
    r2 = subprocess.run(cmd, capture_output=True, cwd=tmp_path)
    assert r1.returncode == 0, r1.stdout.decode()
    assert r1.stdout == r2.stdout
