import csv
import subprocess
import sys

import pytest

from surfsplit import analysis, cli
from surfsplit.errors import SolverError


def run(argv):
    return cli.main(argv)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_mesh_command(tmp_path, capsys):
    out = tmp_path / "m.off"
    assert run(["mesh", "--max-level", "0", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[1] == "6 8 12"
    assert run(["mesh", "--max-level", "2", "--out", str(out)]) == 0
    assert "V=66" in capsys.readouterr().out


def test_mesh_bad_path(tmp_path):
    assert run(["mesh", "--max-level", "0", "--out", str(tmp_path / "missing" / "m.off")]) == cli.EXIT_IO


def test_convergence_schema_and_single_row(tmp_path):
    out = tmp_path / "c.csv"
    assert run(["convergence", "--min-level", "2", "--max-level", "2", "--out", str(out)]) == 0
    with open(out) as fh:
        header = next(csv.reader(fh))
    assert header == cli.CONVERGENCE_COLUMNS
    rows = read_csv(out)
    assert len(rows) == 1
    assert all(rows[0][c] == "" for c in header if c.startswith("eoc_"))
    raw = read_csv(str(out) + ".raw.csv")
    assert float(raw[0]["err_l2_u"]) == pytest.approx(float(rows[0]["err_l2_u"]), rel=1e-5)
    assert len(raw[0]["err_l2_u"]) > len(rows[0]["err_l2_u"])


def test_convergence_delta_absent_cells(tmp_path):
    out = tmp_path / "d.csv"
    assert run(["convergence", "--problem", "delta", "--max-level", "2", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [r["level"] for r in rows] == ["0", "1", "2"]
    assert all(r["err_h1_w"] == "" and r["eoc_h1_w"] == "" for r in rows)
    assert rows[0]["eoc_l2_u"] == "" and rows[1]["eoc_l2_u"] != ""
    assert len(rows[2]["err_l2_u"].replace("e-", "").replace(".", "").lstrip("0")) <= 6


def test_convergence_markdown(tmp_path):
    out = tmp_path / "c.md"
    assert run(["convergence", "--max-level", "1", "--format", "md", "--out", str(out)]) == 0
    text = out.read_text()
    assert "| h | E_L2 | EOC | E_H1 | EOC |" in text
    assert text.count("| 1.41421 |") == 2


def test_convergence_failed_level(tmp_path, monkeypatch):
    real = analysis.solve

    def flaky(system, tol, method):
        if system.mesh.level == 1:
            raise SolverError("forced", residual=1.0)
        return real(system, tol, method)

    monkeypatch.setattr(analysis, "solve", flaky)
    out = tmp_path / "f.csv"
    assert run(["convergence", "--max-level", "2", "--out", str(out)]) == cli.EXIT_SOLVER
    rows = read_csv(out)
    assert [r["err_l2_u"] for r in rows][1] == "FAILED"
    assert rows[2]["err_l2_u"] not in ("", "FAILED")


def test_infsup_command(tmp_path):
    out = tmp_path / "i.csv"
    assert run(["infsup", "--min-level", "0", "--max-level", "3", "--lambda", "1", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 4
    assert all(abs(float(r["beta"]) - 1.0) <= 1e-8 for r in read_csv(str(out) + ".raw.csv"))


def test_coercivity_command(tmp_path):
    out = tmp_path / "k.csv"
    assert run(["coercivity", "--min-level", "1", "--max-level", "3", "--out", str(out)]) == 0
    assert all(float(r["mu_min"]) > 0 for r in read_csv(out))


def test_ritz_command(tmp_path):
    out = tmp_path / "r.csv"
    assert run(["ritz", "--min-level", "1", "--max-level", "4", "--out", str(out)]) == 0
    ratios = [float(r["max_ratio"]) for r in read_csv(str(out) + ".raw.csv")]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))


@pytest.mark.parametrize(
    "argv",
    [
        ["convergence", "--tol", "1e-3"],
        ["convergence", "--tol", "0"],
        ["convergence", "--min-level", "3", "--max-level", "2"],
        ["convergence", "--max-level", "9"],
        ["convergence", "--quad-error", "2"],
        ["convergence", "--quad-assembly", "7"],
        ["convergence", "--problem", "torus"],
        ["infsup", "--max-level", "5"],
        ["coercivity", "--max-level", "4"],
        ["mesh", "--max-level", "1"],
        ["convergence", "--lambda", "2"],
    ],
)
def test_config_errors(argv):
    with pytest.raises(SystemExit) as exc:
        run(argv)
    assert exc.value.code == cli.EXIT_CONFIG


def test_stdout_and_module_entry():
    proc = subprocess.run(
        [sys.executable, "-m", "surfsplit", "convergence", "--max-level", "1"],
        capture_output=True,
        text=True,
        check=True,
    )
    assert proc.stdout.splitlines()[0] == ",".join(cli.CONVERGENCE_COLUMNS)
    assert len(proc.stdout.splitlines()) == 3


def test_iterative_solver_flag(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["convergence", "--max-level", "3", "--out", str(a)]) == 0
    assert run(["convergence", "--max-level", "3", "--solver", "iterative", "--out", str(b)]) == 0
    for ra, rb in zip(read_csv(a), read_csv(b)):
        assert ra["err_l2_u"] == rb["err_l2_u"]
