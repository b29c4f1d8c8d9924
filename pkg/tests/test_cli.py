import csv
import io
import json

import pytest

from cavmesh.cli import EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    code, text = run("solve", "-o", d / "sol.json")
    assert code == EXIT_OK
    return d


def test_solve_reports_boundary_stretch(work):
    data = json.loads((work / "sol.json").read_text())
    assert data
    code, text = run("solve", "-o", work / "again.json", "--lambda", "1.5")
    assert code == EXIT_OK and "r(1) = 1.5" in text


def test_required_n_identity():
    code, text = run("required-n", "--identity", "--kappa", "1", "--json")
    data = json.loads(text)
    assert code == EXIT_OK and data["N_hat"] == 2 and data["N_affine"] == 4
    assert data["tau_tilde0"] is None


def test_required_n_solution(work):
    code, text = run("required-n", "--solution", work / "sol.json", "--eps", "0.01",
                     "--tau", "0.01", "--json")
    data = json.loads(text)
    assert code == EXIT_OK and data["N_tilde"] < data["N_affine"] / 5


def test_required_n_needs_solution():
    assert run("required-n", "--eps", "0.01")[0] == EXIT_USAGE


def test_kappa_table():
    code, text = run("table")
    rows = list(csv.reader(io.StringIO(text)))
    assert code == EXIT_OK and rows[0] == ["kappa", "l1_hat", "l2_hat", "N_hat"]
    counts = [int(r[3]) for r in rows[1:]]
    assert len(counts) == 9 and counts == sorted(counts)


def test_layer_table(work):
    code, text = run("table", "--solution", work / "sol.json", "--eps", "0.01,0.1")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert code == EXIT_OK and list(rows[0]) == ["eps", "tau", "N_tilde", "N_affine", "ratio"]
    assert len(rows) == 2


def test_plan_check_and_sabotage(work, capsys):
    sol, mesh = work / "sol.json", work / "mesh.json"
    code, text = run("plan", "--solution", sol, "-o", mesh)
    assert code == EXIT_OK
    first_n = int(text.split("N_tilde=")[1].split()[0])
    code, text = run("check", mesh, "--solution", sol, "--oracle", "-o", work / "rep.json")
    assert code == EXIT_OK and "all elements pass" in text and "mesh_min_det=" in text
    assert json.loads((work / "rep.json").read_text())["passed"] is True

    bad = work / "bad.json"
    assert run("plan", "--solution", sol, "-o", bad, "--n-override", f"0:{first_n - 1}")[0] == EXIT_OK
    capsys.readouterr()
    code, _ = run("check", bad, "--solution", sol)
    err = capsys.readouterr().err
    assert code == EXIT_VERIFY and "FAIL element" in err and "FAIL layer 0" in err


def test_check_mesh_only_and_missing_solution(work):
    mesh = work / "m2.json"
    run("plan", "--solution", work / "sol.json", "-o", mesh)
    assert run("check", mesh)[0] == EXIT_USAGE
    assert run("check", mesh, "--mesh-only")[0] == EXIT_OK


def test_export_plot_csv(work):
    mesh = work / "m3.json"
    run("plan", "--solution", work / "sol.json", "-o", mesh)
    code, _ = run("export", mesh, "--plot-csv", work / "plot", "-o", work / "copy.json")
    assert code == EXIT_OK
    with open(work / "plot_nodes.csv") as fh:
        assert next(csv.reader(fh)) == ["id", "x", "y"]
    with open(work / "plot_edges.csv") as fh:
        assert next(csv.reader(fh)) == ["edge", "element", "kind", "point", "x", "y"]
    assert json.loads((work / "copy.json").read_text()) == json.loads(mesh.read_text())


def test_config_file_then_flags(work):
    cfg = work / "cfg.json"
    cfg.write_text(json.dumps({"lambda": 1.5, "grid": 500}))
    code, text = run("solve", "--config", cfg, "-o", work / "c1.json")
    assert code == EXIT_OK and "r(1) = 1.5" in text
    code, text = run("solve", "--config", cfg, "--lambda", "1.8", "-o", work / "c2.json")
    assert code == EXIT_OK and "r(1) = 1.8" in text


@pytest.mark.parametrize("body", ['{"lambda": ', '{"colour": 1}', '{"mu": 2.0}'])
def test_bad_config(work, body):
    cfg = work / "bad_cfg.json"
    cfg.write_text(body)
    assert run("solve", "--config", cfg, "-o", work / "x.json")[0] == EXIT_USAGE


def test_bad_mesh_file(work):
    p = work / "broken.json"
    p.write_text('{"nodes": [')
    assert run("check", p, "--mesh-only")[0] == EXIT_USAGE


def test_threads_do_not_change_output(work, monkeypatch):
    monkeypatch.setenv("CAVMESH_THREADS", "1")
    a = run("table")[1]
    monkeypatch.setenv("CAVMESH_THREADS", "4")
    assert run("table")[1] == a
