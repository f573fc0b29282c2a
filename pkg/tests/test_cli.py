import csv
import json
import math
import subprocess
import sys

import pytest

from instrasim.analytic import v_deph_qubit
from instrasim.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER, main, parse_grid


def test_parse_grid_forms():
    grid = parse_grid("0:1:0.05")
    assert len(grid) == 21
    assert grid[0] == 0.0
    assert abs(grid[-1] - 1.0) < 1e-12
    assert len(parse_grid("2.00:2.13:0.01")) == 14
    assert parse_grid("0.7") == [0.7]
    assert parse_grid("0.3:0.3:0.1") == [0.3]


def test_parse_grid_errors():
    with pytest.raises(ValueError, match="step"):
        parse_grid("0:1:0")
    with pytest.raises(ValueError, match="stop"):
        parse_grid("1:0:0.1")
    with pytest.raises(ValueError, match="start:stop:step"):
        parse_grid("0:1")
    with pytest.raises(ValueError, match="finite"):
        parse_grid("nan")
    with pytest.raises(ValueError):
        parse_grid("a:b:c")


def test_hemisphere_stdout_csv(capsys):
    assert main(["hemisphere", "--pwin-grid", "0.75"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "p_win,f_pi,f_q,f_unsharp_z"
    cells = lines[1].split(",")
    assert float(cells[0]) == 0.75
    assert abs(float(cells[1]) - 2.0 / 3.0) < 1e-15
    assert abs(float(cells[2]) - 2.0 / 3.0) < 1e-15


def test_hemisphere_csv_json_parity(tmp_path):
    csv_path = tmp_path / "rows.csv"
    json_path = tmp_path / "rows.json"
    args = ["hemisphere", "--pwin-grid", "0.5:0.75:0.05"]
    assert main(args + ["--format", "csv", "--output", str(csv_path)]) == EXIT_OK
    assert main(args + ["--format", "json", "--output", str(json_path)]) == EXIT_OK

    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        csv_rows = list(reader)
    payload = json.loads(json_path.read_text())
    assert payload["command"] == "hemisphere"
    assert payload["columns"] == ["p_win", "f_pi", "f_q", "f_unsharp_z"]
    assert len(csv_rows) == len(payload["rows"]) == 6
    for crow, jrow in zip(csv_rows, payload["rows"]):
        for col in payload["columns"]:
            assert float(crow[col]) == jrow[col]
    first, last = payload["rows"][0], payload["rows"][-1]
    assert first["p_win"] == 0.5 and abs(first["f_q"] - 1.0) < 1e-15
    assert abs(last["p_win"] - 0.75) < 1e-12
    assert abs(last["f_pi"] - 2.0 / 3.0) < 1e-12


def test_visibility_qubit_row(tmp_path):
    out = tmp_path / "vis.json"
    code = main(
        [
            "visibility",
            "--gamma",
            "0.5",
            "--noise",
            "dephasing",
            "--format",
            "json",
            "--output",
            str(out),
        ]
    )
    assert code == EXIT_OK
    row = json.loads(out.read_text())["rows"][0]
    assert row["d"] == 2 and row["noise"] == "dephasing"
    assert abs(row["v_analytic"] - v_deph_qubit(0.5)) < 1e-15
    assert abs(row["v_sdp"] - row["v_analytic"]) < 1e-5
    assert row["residual"] < 1e-6


def test_visibility_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["visibility", "--gamma", "0.3", "--seed", "5"]
    assert main(args + ["--output", str(a)]) == EXIT_OK
    assert main(args + ["--output", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_config_error_exit_codes(capsys):
    assert main(["visibility"]) == EXIT_CONFIG
    assert "gamma" in capsys.readouterr().err
    assert main(["visibility", "--d", "3", "--gamma", "0.5"]) == EXIT_CONFIG
    assert "relaxed" in capsys.readouterr().err
    assert main(["visibility", "--instrument", "sic", "--d", "3"]) == EXIT_CONFIG
    assert main(["visibility", "--instrument", "sic", "--gamma", "0.5"]) == EXIT_CONFIG
    assert main(["hemisphere", "--pwin-grid", "0:1"]) == EXIT_CONFIG
    assert main(["seesaw", "--floor", "2.0", "--restarts", "0"]) == EXIT_CONFIG
    # argparse rejects unknown flags with the same documented code
    assert main(["hemisphere", "--bogus"]) == EXIT_CONFIG
    capsys.readouterr()


def test_io_error_exit_code(capsys):
    code = main(
        ["hemisphere", "--pwin-grid", "0.5", "--output", "/no-such-dir/rows.csv"]
    )
    assert code == EXIT_IO
    assert "i/o failure" in capsys.readouterr().err


def test_solver_failure_exit_code(monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise RuntimeError("manufactured failure")

    monkeypatch.setattr("instrasim.cli.seesaw_sequential_chsh", boom)
    assert main(["seesaw", "--floor", "2.0"]) == EXIT_SOLVER
    assert "manufactured failure" in capsys.readouterr().err


def test_env_overrides(tmp_path, monkeypatch, capsys):
    out = tmp_path / "env.json"
    monkeypatch.setenv("INSTRASIM_FORMAT", "json")
    monkeypatch.setenv("INSTRASIM_OUTPUT", str(out))
    assert main(["hemisphere", "--pwin-grid", "0.5"]) == EXIT_OK
    assert json.loads(out.read_text())["command"] == "hemisphere"

    # a flag beats the environment
    csv_out = tmp_path / "flag.csv"
    assert main(["hemisphere", "--pwin-grid", "0.5", "--format", "csv",
                 "--output", str(csv_out)]) == EXIT_OK
    assert csv_out.read_text().startswith("p_win,")

    monkeypatch.setenv("INSTRASIM_TOL", "abc")
    assert main(["hemisphere", "--pwin-grid", "0.5"]) == EXIT_CONFIG
    assert "INSTRASIM_TOL" in capsys.readouterr().err


def test_seesaw_row_shape(tmp_path):
    out = tmp_path / "seesaw.json"
    code = main(
        [
            "seesaw",
            "--floor",
            "2.0",
            "--restarts",
            "1",
            "--tol",
            "1e-4",
            "--format",
            "json",
            "--output",
            str(out),
        ]
    )
    assert code == EXIT_OK
    payload = json.loads(out.read_text())
    assert payload["columns"] == ["floor", "s_ab", "s_ac", "seed"]
    row = payload["rows"][0]
    assert row["floor"] == 2.0 and row["seed"] == 0
    bound = 2.0 * math.sqrt(2.0) + 1e-6
    assert row["s_ab"] <= bound and row["s_ac"] <= bound


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "instrasim.cli", "hemisphere", "--pwin-grid", "0.5"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == EXIT_OK
    assert proc.stdout.startswith("p_win,")
