import subprocess
import sys
from importlib.resources import files
from pathlib import Path

import pytest

from isodg.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main, parse_config
from isodg.errors import ConfigParseError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

DISC = """[study]
problem = disc2d
k = 2
levels = 1-4
"""


def write(tmp_path, text, name="study.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_study_writes_csv(tmp_path, capsys):
    out = tmp_path / "out.csv"
    assert main(["study", write(tmp_path, DISC), "-o", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "level,nelem,ndof,l2_error,l2_rate,dg_error,dg_rate"
    assert len(lines) == 5
    assert "L2 rate" in capsys.readouterr().out


def test_study_csv_is_byte_identical_across_runs(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cfg = write(tmp_path, DISC.replace("1-4", "1-3"))
    main(["study", cfg, "-o", str(a)])
    main(["study", cfg, "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_missing_k_is_a_config_error(tmp_path, capsys):
    text = DISC.replace("k = 2\n", "")
    with pytest.raises(ConfigParseError) as info:
        parse_config(text)
    assert info.value.field == "k"
    assert main(["study", write(tmp_path, text)]) == EXIT_CONFIG
    assert "k" in capsys.readouterr().err


def test_bad_value_names_line(tmp_path):
    with pytest.raises(ConfigParseError) as info:
        parse_config(DISC.replace("k = 2", "k = two"))
    assert (info.value.field, info.value.line) == ("k", 3)
    assert main(["study", write(tmp_path, DISC + "geometry_kind = wavy\n")]) == EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path, capsys):
    text = DISC + "[solver]\nmethod = gmres\ntol = 1e-14\nmax_iter = 1\nrestart = 1\n"
    assert main(["study", write(tmp_path, text)]) == EXIT_NUMERICAL
    assert "level 1" in capsys.readouterr().err


def test_io_error_exit_code(tmp_path):
    assert main(["study", str(tmp_path / "missing.ini")]) == EXIT_IO
    text = DISC.replace("levels = 1-4\n", "mesh_files = a.msh, b.msh\n")
    assert main(["study", write(tmp_path, text)]) == EXIT_IO


def test_mesh_files_study(tmp_path):
    data = files("isodg") / "data"
    text = DISC.replace("levels = 1-4\n", f"mesh_files = {data / 'disc_l1.msh'}, {data / 'disc_l2.msh'}\n")
    out = tmp_path / "m.csv"
    assert main(["study", write(tmp_path, text), "-o", str(out)]) == EXIT_OK
    assert out.read_text().splitlines()[1].startswith("0,32,192,")


def test_geometry_check_on_square(tmp_path, capsys):
    text = "[study]\nproblem = square2d\nk = 2\nlevels = 0-2\n"
    assert main(["geometry-check", write(tmp_path, text)]) == EXIT_OK
    rows = capsys.readouterr().out.splitlines()[1:]
    for row in rows:
        assert float(row.split()[2]) <= 1e-12 and float(row.split()[4]) <= 1e-12


def test_solve_and_mesh_info(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ISODG_THREADS", "2")
    assert main(["solve", write(tmp_path, DISC), "--level", "2", "-o", str(tmp_path / "u.npy")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "ndof=768" in out and "stability_ratio" in out
    assert (tmp_path / "u.npy").exists()
    ball = str(files("isodg") / "data" / "ball48.msh")
    assert main(["mesh-info", "--mesh", ball]) == EXIT_OK
    assert "elements: 48" in capsys.readouterr().out


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ISODG_THREADS", "many")
    assert main(["study", write(tmp_path, DISC.replace("1-4", "1-2"))]) == EXIT_CONFIG


@pytest.mark.parametrize("name", ["table1_k2", "table1_k3", "table2", "table3", "table4",
                                  "constant_sanity", "projection_lemma31"])
def test_shipped_configs_parse(name):
    config, output = parse_config((CONFIGS / f"{name}.ini").read_text())
    assert len(config.levels) >= 2 and output["csv"].endswith(".csv")


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "isodg.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "geometry-check" in res.stdout
