import os

import numpy as np
import pytest

from hypbvp import cases
from hypbvp.cli import main, read_tables
from hypbvp.problemfile import ProblemFileError, dumps, load, parse_text

TRANSPORT = """\
[system]
n = 1
m = 1

[speeds]
a_1 = 1

[boundary]
mu_1 = sin(t)
reflect_1 = from=1; weight=0.5*bump(t, -6, -5); side=1

[domain]
T = 1
Nx = 20
Nt = 120
"""


@pytest.fixture
def transport_file(tmp_path):
    path = tmp_path / "transport.problem"
    path.write_text(TRANSPORT)
    return str(path)


def test_solve_and_verify(transport_file, tmp_path):
    out = str(tmp_path / "out")
    assert main(["solve", transport_file, "--out", out, "--gnuplot"]) == 0
    assert sorted(os.listdir(out)) == ["plot.gp", "report.txt", "t_grid.csv", "u_1.csv", "x_grid.csv"]
    with open(os.path.join(out, "u_1.csv")) as fh:
        assert fh.readline().startswith("# component 1, Nx=20, Nt=120, T=1")
    u, T = read_tables(out, 1)
    g = u.grid
    exact = np.sin(g.t[None, :] - g.x[:, None])
    window = g.window_rows()
    assert np.max(np.abs(u.values[0] - exact)[:, window]) < 1e-12
    report = open(os.path.join(out, "report.txt")).read()
    assert "verdict.dissipativity: pass" in report
    assert main(["verify", transport_file, out]) == 0
    assert main(["verify", "--config", transport_file, out]) == 0


def test_modes_agree(transport_file, tmp_path):
    tables = {}
    for mode in ("picard", "two-phase", "march"):
        out = str(tmp_path / mode)
        assert main(["solve", transport_file, "--out", out, "--mode", mode]) == 0
        tables[mode] = read_tables(out, 1)[0]
    g = tables["picard"].grid
    w = g.window_rows()
    for mode in ("two-phase", "march"):
        assert np.max(np.abs(tables[mode].values - tables["picard"].values)[:, :, w]) < 1e-9


def test_zero_solution_fails_verification(tmp_path, capsys):
    path = tmp_path / "forced.problem"
    path.write_text(TRANSPORT.replace("[boundary]", "[forcing]\nf_1 = 2\n\n[boundary]"))
    out = str(tmp_path / "out")
    assert main(["solve", str(path), "--out", out]) == 0
    u, _ = read_tables(out, 1)
    np.savetxt(os.path.join(out, "u_1.csv"), np.zeros_like(u.values[0]).T, delimiter=",",
               header="component 1, Nx=20, Nt=120, T=1.0", comments="# ")
    capsys.readouterr()
    assert main(["verify", str(path), out]) == 4
    assert "pde_res: 2.000000e+00" in capsys.readouterr().out


def test_counterexample_needs_skip(tmp_path):
    out = str(tmp_path / "ce")
    assert main(["cases", "export", "counterexample-l1", out]) == 0
    problem = os.path.join(out, "counterexample-l1.problem")
    text = open(problem).read().replace("Nx = 200", "Nx = 20").replace("Nt = 200", "Nt = 80")
    small = tmp_path / "ce.problem"
    small.write_text(text)
    assert main(["solve", str(small), "--out", str(tmp_path / "x")]) == 3
    assert main(["solve", str(small), "--out", str(tmp_path / "y"), "--skip-checks"]) == 0
    report = open(tmp_path / "y" / "report.txt").read()
    assert "verdict.factorization: fail" in report
    assert "verdict.coupling-decay: fail" in report
    assert main(["diagnose", str(small)]) == 3


def test_exported_kernel_verifies(tmp_path):
    out = str(tmp_path / "ce")
    assert main(["cases", "export", "counterexample-l1", out]) == 0
    assert main(["verify", os.path.join(out, "counterexample-l1.problem"), out,
                 "--tol", "1e-2"]) == 0


def test_diagnose(tmp_path, capsys):
    half = tmp_path / "half.problem"
    half.write_text(TRANSPORT.replace("0.5*bump(t, -6, -5)", "0.5"))
    assert main(["diagnose", str(half), "--ell", "2"]) == 0
    text = capsys.readouterr().out
    assert "norm C^1 >= 0.5\n" in text and "norm C^2 >= 0.25\n" in text
    loud = tmp_path / "loud.problem"
    loud.write_text(TRANSPORT.replace("0.5*bump(t, -6, -5)", "1.5"))
    assert main(["diagnose", str(loud)]) == 3
    assert "dissipativity: fail" in capsys.readouterr().out
    assert main(["solve", str(loud), "--skip-checks", "--out", str(tmp_path / "o")]) == 2


def test_input_errors(tmp_path, capsys):
    assert main(["cases", "export", "nope", str(tmp_path / "n")]) == 1
    bad = tmp_path / "bad.problem"
    bad.write_text(TRANSPORT.replace("a_1 = 1", "a_1 = 1 +"))
    assert main(["solve", str(bad)]) == 1
    assert "line 6 [speeds]" in capsys.readouterr().err
    assert main(["solve", str(tmp_path / "missing.problem")]) == 1


def test_cases_list(capsys):
    assert main(["cases", "list"]) == 0
    assert "counterexample-l1" in capsys.readouterr().out


@pytest.mark.parametrize("text,where", [
    ("[system]\nn = 1\nm = 1\n[speeds]\na_1 = 1\nz = 3\n", "line 6"),
    ("[system]\nn = 1\nm = 1\n[speeds]\na_1 = 1\na_1 = 2\n", "duplicate"),
    ("[system]\nn = 1\nm = 1\n[speeds]\na_2 = 1\n", "outside 1..1"),
    ("[system]\nn = 1\nm = 1\n[colours]\n", "unknown section"),
    ("[system]\nn = 1\nm = 1\n[speeds]\na_1 = 1\n[boundary]\nreflect_1 = from=1\n", "weight"),
])
def test_problem_file_errors(text, where):
    with pytest.raises(ProblemFileError, match=where):
        parse_text(text)


@pytest.mark.parametrize("name", cases.names())
def test_problem_file_round_trip(name, tmp_path):
    assert main(["cases", "export", name, str(tmp_path)]) == 0
    pf = load(str(tmp_path / f"{name}.problem"))
    again = parse_text(dumps(pf))
    assert dumps(again) == dumps(pf)
    assert again.spec.n == cases.get(name).spec.n


UNIQUE = [n for n in cases.names() if cases.get(n).tag == "unique-solvable"]


@pytest.mark.parametrize("name", UNIQUE)
def test_export_solve_verify(name, tmp_path):
    case_dir = tmp_path / "case"
    assert main(["cases", "export", name, str(case_dir)]) == 0
    problem = str(case_dir / f"{name}.problem")
    out = str(tmp_path / "sol")
    assert main(["solve", problem, "--out", out]) == 0
    assert main(["verify", problem, out]) == 0


def test_threads_give_identical_tables(tmp_path):
    assert main(["cases", "export", "manufactured-coupled", str(tmp_path / "case")]) == 0
    problem = str(tmp_path / "case" / "manufactured-coupled.problem")
    blobs = []
    for threads in ("1", "3"):
        out = tmp_path / f"t{threads}"
        assert main(["solve", problem, "--out", str(out), "--threads", threads]) == 0
        blobs.append([(out / f"u_{j}.csv").read_bytes() for j in (1, 2)])
    assert blobs[0] == blobs[1]
