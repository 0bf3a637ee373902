from __future__ import annotations

import json
import subprocess
import sys

import pytest

from gfem2d import __version__
from gfem2d.cli import main

SMALL = ["--p", "1", "--N", "4,6,8", "--geom", "line", "--jobs", "1"]


def test_converge_writes_outputs(tmp_path, capsys):
    assert main(["converge", "--scheme", "fem", *SMALL, "--out", str(tmp_path)]) == 0
    stem = tmp_path / "converge_fem_p1_line"
    for ext in (".csv", ".json", ".svg"):
        assert stem.with_suffix(ext).exists()
    meta = json.loads(stem.with_suffix(".json").read_text())
    assert meta["seeds"]["eigsh"] == 20240607
    assert "nullspace_cutoff" in meta["tolerances"]
    assert "slope" in capsys.readouterr().out
    assert stem.with_suffix(".svg").read_text().startswith("<svg")


def test_csv_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["scn", "--scheme", "hosgfem", *SMALL, "--out", str(d), "--no-plot"]) == 0
    name = "scn_hosgfem_p1_line.csv"
    assert (a / name).read_bytes() == (b / name).read_bytes()
    assert not (a / "scn_hosgfem_p1_line.svg").exists()


def test_timing_column(tmp_path):
    main(["converge", "--scheme", "fem", *SMALL, "--out", str(tmp_path), "--timing", "--no-plot"])
    rows = (tmp_path / "converge_fem_p1_line.csv").read_text().splitlines()[1:]
    assert all(float(r.split(",")[-1]) > 0 for r in rows)


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scheme": "gfem", "p": 1, "N": [4, 6, 8], "geom": "circle",
                               "jobs": 1}))
    out = tmp_path / "out"
    assert main(["converge", "--config", str(cfg), "--out", str(out), "--no-plot"]) == 0
    assert (out / "converge_gfem_p1_circle.csv").exists()
    assert main(["converge", "--config", str(cfg), "--geom", "line", "--out", str(out),
                 "--no-plot"]) == 0
    assert (out / "converge_gfem_p1_line.csv").exists()


def test_robustness_and_dump(tmp_path):
    rc = main(["robustness", "--schemes", "fem,hosgfem", "--p", "1", "--N", "6", "--i", "1..2",
               "--out", str(tmp_path), "--jobs", "1", "--dump-matrix", "--no-plot"])
    assert rc == 0
    csvs = list(tmp_path.glob("robustness*.csv"))
    assert len(csvs) == 1
    assert len(csvs[0].read_text().splitlines()) == 1 + 4
    dumps = list(tmp_path.rglob("*.txt"))
    assert len(dumps) == 4


def test_verify_lemma(tmp_path, capsys):
    assert main(["verify-lemma1", "--geom", "line", "--p", "3", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "lemma_line_p3.csv").exists()


@pytest.mark.parametrize("argv", [
    ["scn", "--p", "9"],
    ["converge", "--scheme", "xfem"],
    ["converge", "--N", "10,5,20"],
    ["robustness", "--i", "3..1"],
    ["bogus"],
    ["converge", "--config", "/nonexistent/cfg.json"],
])
def test_usage_errors_exit_one(argv, tmp_path, capsys):
    assert main([*argv, "--out", str(tmp_path)] if argv[0] != "bogus" else argv) == 1
    assert "error" in capsys.readouterr().err.lower()


def test_selftest_failure_exit_two(monkeypatch, tmp_path):
    import gfem2d.selftest as st

    monkeypatch.setattr(st, "run_checks", lambda: [("fake", False, "forced")])
    assert main(["selftest", "--out", str(tmp_path)]) == 2


def test_version_and_module_entry():
    res = subprocess.run([sys.executable, "-m", "gfem2d", "--version"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    assert __version__ in res.stdout
