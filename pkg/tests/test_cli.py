import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mirrorbias.cli import main


def test_potentials_listing(capsys):
    assert main(["potentials", "--at", "1.0"]) == 0
    out = capsys.readouterr().out
    assert "pow:p=3,omega=1" in out and "hypentropy" in out


def test_train_compare_diagnose_pca(tmp_path, capsys):
    run = str(tmp_path / "run")
    assert main(["train", "--dataset", "fig1", "--width", "20", "--potential", "pow:p=3,omega=1",
                 "--seed", "4", "--out", run]) == 0
    for f in ("trajectory.csv", "params.csv", "meta.json"):
        assert os.path.exists(os.path.join(run, f))
    meta = json.loads(open(os.path.join(run, "meta.json")).read())
    assert meta["status"] == "Converged" and meta["seed"] == 4

    sol = str(tmp_path / "sol")
    assert main(["variational", "--dataset", "fig1", "--potential", "pow:p=3,omega=1",
                 "--out", sol]) == 0
    capsys.readouterr()
    path = os.path.join(sol, "variational_pow_p3_omega1.csv")
    assert main(["compare", "--run", run, "--solution", path]) == 0
    res = json.loads(capsys.readouterr().out)
    assert 0 < res["linf_error"] < 1 and res["converged"]

    assert main(["diagnose", "--run", run]) == 0
    diag = json.loads(capsys.readouterr().out)
    assert diag["param_drift_sup"] > 0
    assert os.path.exists(os.path.join(run, "lambda_min.csv"))

    assert main(["pca", "--run", run]) == 0
    rows = np.loadtxt(os.path.join(run, "pca.csv"), delimiter=",", skiprows=1)
    assert rows.shape[1] == 3 and os.path.exists(os.path.join(run, "pca.svg"))


def test_train_budget_exhausted_exit_code(tmp_path):
    assert main(["train", "--width", "10", "--max-steps", "5", "--out", str(tmp_path)]) == 1


def test_run_sweep_and_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dataset": "fig1", "widths": [8], "potentials": ["quadratic"],
                               "seeds": [0, 1], "train": {"max_steps": 300000}}))
    out = str(tmp_path / "sweep")
    assert main(["run", "--config", str(cfg), "--out", out, "--seed", "3"]) == 0
    rep = json.loads(open(os.path.join(out, "report.json")).read())
    assert rep["config"]["seeds"] == [3] and len(rep["cells"]) == 1
    assert main(["run", "--config", str(cfg), "--out", out, "--max-steps", "2"]) == 1


def test_inline_dataset_file(tmp_path):
    ds = tmp_path / "d.json"
    ds.write_text(json.dumps({"xs": [-0.5, 0.5], "ys": [0.1, -0.1]}))
    assert main(["variational", "--dataset", str(ds), "--out", str(tmp_path / "v")]) == 0


def _exit_code(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.mark.parametrize("argv", [
    ["run", "--widths", "", "--out", "."],
    ["train", "--potential", "cubic"],
    ["run", "--config", "/nonexistent.json"],
])
def test_bad_input_exit_code(argv, tmp_path, capsys):
    argv = [str(tmp_path) if a == "." else a for a in argv]
    assert _exit_code(argv) == 2
    assert capsys.readouterr().err


def test_empty_widths_rejected(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"widths": []}))
    assert main(["run", "--config", str(cfg)]) == 2
    assert "widths" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mirrorbias", "potentials"],
                         capture_output=True, text=True, timeout=300)
    assert res.returncode == 0 and "quadratic" in res.stdout
