import csv
import subprocess
import sys

import numpy as np
import pytest

from bait import cli, fileio, harness


def _pool(tmp_path, rng, n=30, d=4, k=3):
    X = rng.standard_normal((n, d))
    P = rng.dirichlet(np.ones(k), size=n)
    fileio.write_f32(tmp_path / "emb.bin", X)
    fileio.write_f32(tmp_path / "probs.bin", P)
    fileio.write_ids(tmp_path / "labeled.txt", [0, 1, 2])
    return X, P


def test_select_prints_ids(tmp_path, rng, capsys):
    _pool(tmp_path, rng)
    code = cli.main(["select", "--embeddings", str(tmp_path / "emb.bin"), "--probs", str(tmp_path / "probs.bin"),
                     "--labeled", str(tmp_path / "labeled.txt"), "-B", "4"])
    assert code == 0
    ids = [int(v) for v in capsys.readouterr().out.split()]
    assert len(ids) == 4 and not set(ids) & {0, 1, 2}


def test_select_csv_regression(tmp_path, rng, capsys):
    fileio.write_csv_matrix(tmp_path / "emb.csv", rng.standard_normal((10, 3)))
    assert cli.main(["select", "--embeddings", str(tmp_path / "emb.csv"), "-B", "2", "--mode", "regression"]) == 0
    assert len(capsys.readouterr().out.split()) == 2


def test_config_errors_exit_2(tmp_path, rng, capsys):
    _pool(tmp_path, rng)
    assert cli.main(["select", "--embeddings", str(tmp_path / "nope.bin"), "-B", "2"]) == 2
    assert cli.main(["select", "--embeddings", str(tmp_path / "emb.bin"), "-B", "2"]) == 2  # needs probs
    assert cli.main(["select", "--embeddings", str(tmp_path / "emb.bin"), "-B", "40",
                     "--probs", str(tmp_path / "probs.bin")]) == 2
    assert cli.main(["select", "--embeddings", str(tmp_path / "emb.bin"), "-B", "2", "--mode", "regression",
                     "--strategy", "confidence"]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["select", "--strategy", "badge"])
    assert exc.value.code == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    # a zero pool with lambda = 0 leaves M singular
    fileio.write_f32(tmp_path / "zero.bin", np.zeros((4, 2)))
    code = cli.main(["select", "--embeddings", str(tmp_path / "zero.bin"), "-B", "1", "--mode", "regression",
                     "--lambda", "0"])
    assert code == 3


def test_bayes_sim_csv(tmp_path):
    out = tmp_path / "risk.csv"
    assert cli.main(["bayes-sim", "--kind", "orthonormal-decay", "--d", "10", "--b-max", "12",
                     "--n", "2000", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["B", "strategy", "bayes_risk"]
    assert len(rows) == 24
    assert {r["strategy"] for r in rows} == {"trace-fisher", "log-det"}


def test_project(tmp_path, rng):
    fileio.write_f32(tmp_path / "x.bin", rng.standard_normal((5, 20)))
    assert cli.main(["project", str(tmp_path / "x.bin"), str(tmp_path / "y.bin"), "--dim", "8"]) == 0
    assert fileio.read_matrix(tmp_path / "y.bin").shape == (5, 8)


def test_simulate_and_analyze(tmp_path, capsys):
    X, y = harness.make_gaussian_mixture(150, 5, 3, seed=2, separation=5.0, nuisance_dims=1)
    fileio.write_f32(tmp_path / "emb.bin", X)
    (tmp_path / "y.txt").write_text("".join(f"{v}\n" for v in y))
    (tmp_path / "exp.cfg").write_text(
        "strategy = bait,random\nbatch_size = 5\nseed_size = 10\nrounds = 4\nseeds = 0,1,2\n"
        "embeddings = emb.bin\nlabels = y.txt\n"
    )
    assert cli.main(["simulate", str(tmp_path / "exp.cfg"), "--out-dir", str(tmp_path / "runs")]) == 0
    assert (tmp_path / "runs" / "runs.csv").exists()
    assert cli.main(["analyze", str(tmp_path / "runs"), "-B", "5", "--seed-size", "10",
                     "--out", str(tmp_path / "pen.csv")]) == 0
    rows = list(csv.reader((tmp_path / "pen.csv").open()))
    assert rows[0] == ["strategy", "bait", "random"]
    assert rows[-1][0] == "mean"
    assert cli.main(["simulate", str(tmp_path / "missing.cfg")]) == 2


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "bait.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for sub in ("select", "simulate", "bayes-sim", "analyze", "project"):
        assert sub in out.stdout
