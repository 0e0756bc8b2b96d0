import csv
import itertools
import json
import subprocess
import sys

import numpy as np
import pytest

from kkmini import harness
from kkmini.cli import main
from kkmini.harness import CSV_COLUMNS, ConfigError, SolverConfig, run_experiment, summarize


def _cfg(tmp_path, **kw):
    base = dict(dataset="blobs", n=300, data_k=3, d=2, k=3, b=32, tau=64, iters=20,
                kappa=4.0, out=str(tmp_path / "r.csv"))
    base.update(kw)
    return SolverConfig(**base)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_repeats_and_seeds(tmp_path):
    cfg = _cfg(tmp_path, seed=7, repeats=10)
    run_experiment(cfg)
    rows = _rows(cfg.out)
    assert [int(r["seed"]) for r in rows] == list(range(7, 17))
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    doc = json.loads((tmp_path / "r.json").read_text())
    assert len(doc["runs"]) == 10 and len(doc["runs"][0]["labels"]) == 300


@pytest.mark.parametrize("algo", harness.ALGOS)
def test_determinism_across_thread_counts(tmp_path, monkeypatch, algo):
    metric = ["seed", "iters_run", "final_cost", "ari", "nmi"]
    runs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("KKMINI_THREADS", threads)
        out = tmp_path / f"{algo}{threads}.csv"
        run_experiment(_cfg(tmp_path, algo=algo, repeats=3, out=str(out)))
        runs.append([[r[m] for m in metric] for r in _rows(out)])
    assert runs[0] == runs[1]


def test_row_blanks(tmp_path):
    rows = {a: run_experiment(_cfg(tmp_path, algo=a), write=False)[0].row() for a in harness.ALGOS}
    assert rows["full"]["b"] == rows["full"]["tau"] == rows["full"]["lr"] == ""
    assert rows["minibatch"]["tau"] == "" and rows["minibatch"]["b"] == 32
    assert rows["truncated"]["tau"] == 64
    assert rows["euclid_lloyd"]["kernel"] == "euclidean"
    good = run_experiment(_cfg(tmp_path, algo="full", seed=2), write=False)[0]
    assert good.ari == 1.0


def test_tau_auto_and_oracle_check(tmp_path):
    r = run_experiment(_cfg(tmp_path, tau="auto", epsilon=0.5, b=8, iters=5, oracle_check=True), write=False)[0]
    assert r.tau == int(np.ceil(8 * np.log(56) ** 2))
    assert r.extra["max_center_gap"] <= 0.5 / 28 + 1e-9


@pytest.mark.parametrize("bad", [dict(algo="svm"), dict(k=0), dict(b=0), dict(repeats=0), dict(kernel="rbf"),
                                 dict(tau="auto"), dict(lr="adam"), dict(kappa=-1.0)])
def test_config_errors(tmp_path, bad):
    with pytest.raises(ConfigError):
        _cfg(tmp_path, **bad)


def test_unknown_field_and_missing_dataset(tmp_path):
    with pytest.raises(ConfigError):
        SolverConfig.from_dict({"colour": "red"})
    with pytest.raises((ConfigError, FileNotFoundError)):
        run_experiment(_cfg(tmp_path, dataset=str(tmp_path / "none.csv")))


def test_header_mismatch(tmp_path):
    (tmp_path / "r.csv").write_text("a,b\n")
    with pytest.raises(ConfigError):
        run_experiment(_cfg(tmp_path))


def _write(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        w.writerows(rows)


def _row(**kw):
    r = dict.fromkeys(CSV_COLUMNS, "0")
    r.update(dataset="d", algo="truncated", kernel="gaussian", b="256", tau="200", lr="sqrt")
    r.update(kw)
    return r


def test_summarize_examples(tmp_path):
    _write(tmp_path / "a.csv", [_row(ari="0.4"), _row(ari="0.6"), _row(ari="0.9", b="512")])
    cells = {c["b"]: c for c in summarize([tmp_path / "a.csv"])}
    assert cells["256"]["ari_mean"] == pytest.approx(0.5)
    assert cells["256"]["ari_std"] == pytest.approx(0.1414, abs=1e-4)
    assert cells["512"]["ari_mean"] == 0.9 and cells["512"]["ari_std"] == 0.0


def test_summarize_grid(tmp_path):
    grid = list(itertools.product(["minibatch", "truncated"], ["2048", "1024", "512", "256"], ["50", "100", "200", "300"]))
    _write(tmp_path / "g.csv", [_row(algo=a, b=b, tau=t) for a, b, t in grid for _ in range(2)])
    assert len(summarize([tmp_path / "g.csv"])) == 32
    (tmp_path / "bad.csv").write_text("x,y\n1,2\n")
    with pytest.raises(ConfigError):
        summarize([tmp_path / "bad.csv"])


def test_cli_run_summarize_gamma(tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"dataset": "blobs", "n": 200, "data_k": 2, "k": 2, "algo": "minibatch",
                               "b": 16, "iters": 10}))
    out = tmp_path / "o.csv"
    assert main(["run", "--config", str(cfg), "--repeats", "2", "--out", str(out), "--lr", "count"]) == 0
    rows = _rows(out)
    assert len(rows) == 2 and rows[0]["lr"] == "count"
    capsys.readouterr()
    assert main(["summarize", str(out)]) == 0
    text = capsys.readouterr().out
    assert text.startswith("dataset,algo,kernel,b,tau,lr,runs") and len(text.strip().splitlines()) == 2
    assert main(["summarize", str(out), "--out", str(tmp_path / "s.json")]) == 0
    assert json.loads((tmp_path / "s.json").read_text())[0]["runs"] == 2
    assert main(["gamma", "--dataset", "blobs", "--n", "100", "--kernel", "gaussian"]) == 0
    assert json.loads(capsys.readouterr().out)["sqrt_max_diag"] == 1.0


def test_cli_errors(tmp_path, capsys):
    assert main(["run", "--algo", "svm", "--out", str(tmp_path / "x.csv")]) == 2
    assert "kkmini: error:" in capsys.readouterr().err
    assert main(["run", "--dataset", str(tmp_path / "nope.csv")]) == 2


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "kkmini.cli", "gamma", "--dataset", "circles", "--n", "50",
                           "--kernel", "knn", "--knn", "5"], capture_output=True, text=True, check=True)
    rep = json.loads(proc.stdout)
    assert rep["sqrt_max_diag"] == 0.0 and 0 < rep["sqrt_max_abs"] < 1
