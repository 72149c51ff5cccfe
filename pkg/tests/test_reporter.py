import csv
import json

import numpy as np

from spinkeldysh.reporter import print_step_result, print_summary_table, write_csv, write_json

COLUMNS = ["observable", "t", "re_lattice", "im_lattice"]
ROWS = [
    ["same_site", 0.1, np.float64(0.24), np.float64(-0.01)],
    ["same_site", 0.2, np.float64(0.23), np.float64(-0.02)],
]
CONFIG = {"task": "lattice-correlator", "contour": {"beta": 3.0, "n": [5000]}}


def test_write_csv(tmp_path):
    path = write_csv(tmp_path / "out" / "result.csv", COLUMNS, ROWS, CONFIG, "abc123")
    lines = path.read_text().splitlines()
    assert lines[0] == "# spec_hash: abc123"
    assert lines[1].startswith("# config: ")
    assert json.loads(lines[1][len("# config: "):]) == CONFIG
    records = list(csv.reader(lines[2:]))
    assert records[0] == COLUMNS
    assert records[1] == ["same_site", "0.1", "0.24", "-0.01"]
    assert not (tmp_path / "out" / "result.csv.tmp").exists()


def test_write_json(tmp_path):
    diagnostics = {"partition_trace": complex(1.5, 0.0), "deviation": np.array([1e-3, 2e-3])}
    path = write_json(tmp_path / "result.json", COLUMNS, ROWS, CONFIG, "abc123", diagnostics)
    data = json.loads(path.read_text())
    assert data["config"] == CONFIG
    assert data["spec_hash"] == "abc123"
    assert data["results"]["columns"] == COLUMNS
    assert data["results"]["rows"][1] == ["same_site", 0.2, 0.23, -0.02]
    assert data["diagnostics"]["partition_trace"] == [1.5, 0.0]
    assert data["diagnostics"]["deviation"] == [1e-3, 2e-3]


def test_writers_are_deterministic(tmp_path):
    first = write_json(tmp_path / "a.json", COLUMNS, ROWS, CONFIG, "h", {}).read_bytes()
    second = write_json(tmp_path / "b.json", COLUMNS, ROWS, CONFIG, "h", {}).read_bytes()
    assert first == second


def test_summary_table_counts(capsys):
    steps = [
        {"id": "propagators N=5000", "status": "passed", "duration": 1.0},
        {"id": "same_site", "status": "passed", "duration": 0.5},
        {"id": "s1s1 t=1", "status": "flagged", "duration": 2.0},
        {"id": "neighbor_site", "status": "failed", "duration": 0.1},
    ]
    print_summary_table(steps, 3.6, title="lattice-correlator summary", color_enabled=False)
    out = capsys.readouterr().out
    assert "===== lattice-correlator summary =====" in out.replace("=" * 20, "=====")
    assert "Total Steps: 4 | Passed: 2 | Failed: 1 | Flagged: 1" in out
    assert "Total Execution Time: 3.60s" in out


def test_summary_table_empty(capsys):
    print_summary_table([], color_enabled=False)
    assert "No steps to summarize." in capsys.readouterr().out


def test_step_result_plain(capsys):
    print_step_result("same_site", "passed", 0.25, color_enabled=False)
    assert capsys.readouterr().out.strip() == "PASSED: same_site (0.25s)"
