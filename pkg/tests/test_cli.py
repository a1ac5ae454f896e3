import json

import pytest

from shrinkerlab.cli import RunConfig, main, threads
from shrinkerlab.errors import ShrinkerLabError


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_area_plane(capsys):
    code, out = _run(capsys, "area", "--shape", "plane", "--n", "2", "--R", "12", "--h", "0.05")
    res = json.loads(out)
    assert code == 0 and res["pass"]
    assert res["value"] == pytest.approx(1.0, abs=1e-4)
    assert res["config"]["h"] == 0.05


def test_area_analytic_n3(capsys):
    code, out = _run(capsys, "area", "--shape", "sphere", "--n", "3", "--R", "5")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(1.4531153743187188, rel=1e-12)


def test_failed_check_exits_one(capsys):
    code, out = _run(capsys, "area", "--shape", "plane", "--n", "2", "--R", "3", "--h", "0.3", "--tol", "1e-14")
    res = json.loads(out)
    assert code == 1 and res["status"] == "failed" and not res["pass"]


@pytest.mark.parametrize("argv", [
    ["area", "--h", "-1"],
    ["area", "--tol", "0"],
    ["growth", "--shape", "plane", "--n", "2", "--R", "6"],
    ["certify", "--shape", "plane", "--n", "1", "--R", "4", "--r2", "3"],
    ["residual", "--mesh", "/nonexistent/file"],
    ["area", "--n", "2", "--k", "5"],
])
def test_config_errors_exit_two(capsys, argv):
    code, out = _run(capsys, *argv)
    res = json.loads(out)
    assert code == 2 and res["status"] == "error" and res["message"]


def test_bad_flag_exits_two(capsys):
    assert main(["area", "--bogus"]) == 2


def test_growth_csv_deterministic(capsys, tmp_path):
    argv = ["growth", "--shape", "cylinder", "--n", "2", "--R", "5", "--h", "0.2", "--r1", "3", "--step", "0.5"]
    code, out1 = _run(capsys, *argv)
    _, out2 = _run(capsys, *argv)
    assert code == 0 and out1 == out2
    head, cols = out1.splitlines()[:2]
    assert json.loads(head[2:])["command"] == "growth"
    assert cols == "r,V,T,regular"
    path = tmp_path / "g.csv"
    code, summary = _run(capsys, *argv, "--out", str(path))
    assert path.read_text().splitlines()[1:] == out1.splitlines()[1:] and json.loads(summary)["pass"]


def test_catalog_writes_mesh(capsys, tmp_path):
    path = tmp_path / "c.shrnk"
    code, out = _run(capsys, "catalog", "--n", "1", "--k", "1", "--R", "4", "--out", str(path))
    assert code == 0 and json.loads(out)["mesh"] == str(path)
    code, out = _run(capsys, "residual", "--mesh", str(path), "--n", "1")
    assert code == 0


def test_catalog_rotated_high_dimension(capsys):
    code, out = _run(capsys, "catalog", "--n", "4", "--k", "2", "--rotate", "--seed", "11")
    assert code == 0 and json.loads(out)["residual"] <= 1e-12


def test_certify_and_cutoff(capsys):
    code, out = _run(capsys, "certify", "--shape", "plane", "--n", "1", "--R", "4", "--h", "0.01")
    res = json.loads(out)
    assert code == 0 and res["verdict"] == "fires"
    code, out = _run(capsys, "cutoff", "--shape", "plane", "--n", "3", "--R", "6", "--points", "3")
    res = json.loads(out)
    assert code == 0 and res["inputs"]["points"] == 3


def test_rn_sweep(capsys):
    code, out = _run(capsys, "rn-sweep", "--n", "1")
    assert code == 0
    assert out.splitlines()[1] == "n,k,Rstar,r1,r2,mass,energy,margin"
    code, out = _run(capsys, "rn-sweep", "--n", "1", "--step", "0.5")
    assert code == 2


def test_frankel_double(capsys, monkeypatch):
    monkeypatch.setenv("SHRINKERLAB_THREADS", "2")
    assert threads() == 2
    code, out = _run(capsys, "frankel", "--n", "1", "--pair", "double")
    res = json.loads(out)
    assert code == 0 and res["results"][0]["verdict"] == "DisjointEvidence"


def test_threads_default(monkeypatch):
    monkeypatch.delenv("SHRINKERLAB_THREADS", raising=False)
    assert threads() == 1
    monkeypatch.setenv("SHRINKERLAB_THREADS", "junk")
    assert threads() == 1


def test_run_config_validation():
    with pytest.raises(ShrinkerLabError):
        RunConfig("nope")
    assert RunConfig("area").to_dict()["command"] == "area"
