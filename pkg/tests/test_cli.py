import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from edgelgnb import datagen, lgnb, metrics
from edgelgnb.cli import main
from edgelgnb.series import read_csv


def run(*argv):
    return main([str(a) for a in argv])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_datagen_row_count(tmp_path):
    out = tmp_path / "corpus.csv"
    assert run("datagen", "--weeks", 52, "--seed", 7, "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "timestamp,value"
    assert len(lines) == 52 * 672 + 1
    labels = rows(tmp_path / "corpus.labels.csv")
    assert labels[0] == ["week_index", "label", "kind"] and len(labels) == 53


def test_unknown_subcommand_prints_usage():
    proc = subprocess.run([sys.executable, "-m", "edgelgnb", "frobnicate", "--x"],
                          capture_output=True, text=True)
    assert proc.returncode != 0
    assert "usage:" in proc.stderr


def test_missing_seed_is_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        run("datagen", "--weeks", 2, "--out", "x.csv")
    assert exc.value.code != 0
    assert "--seed" in capsys.readouterr().err


def test_simulate_cloud_minimum_at_volume_8(tmp_path):
    out = tmp_path / "curve.csv"
    assert run("simulate", "--deployment", "cloud_default.json", "--volumes", "1:12",
               "--seed", 0, "--out", out) == 0
    table = rows(out)
    assert table[0] == ["volume", "mean_ms", "p50_ms", "p95_ms", "max_ms", "dropped"]
    body = table[1:]
    assert len(body) == 12
    best = min(body, key=lambda r: float(r[1]))
    assert best[0] == "8"


def test_error_is_one_line_on_stderr(tmp_path, capsys):
    assert run("detect", "--model", tmp_path / "nope.json", "--corpus", tmp_path / "c.csv",
               "--out", tmp_path / "p.csv") == 1
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "model not found" in err


def test_malformed_csv_names_file_and_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,value\n2018-01-01T00:00:00Z,1\nnot-a-time,2\n")
    (tmp_path / "bad.labels.csv").write_text("week_index,label,kind\n")
    assert run("train", "--corpus", bad, "--seed", 1, "--out", tmp_path / "m.json") == 1
    assert f"{bad}:3" in capsys.readouterr().err


def test_missing_output_directory(tmp_path, capsys):
    assert run("datagen", "--weeks", 1, "--seed", 1, "--out", tmp_path / "no" / "c.csv") == 1
    assert "output directory" in capsys.readouterr().err


def test_compare_prints_report(capsys):
    assert run("compare") == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["deltas"]["model_size_mb"] == -1.65


def _bytes(*paths):
    return [p.read_bytes() for p in paths]


def test_datagen_and_simulate_are_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        run("datagen", "--weeks", 3, "--seed", 11, "--out", d / "c.csv")
        run("simulate", "--deployment", "edge_default", "--volumes", "1,5,9", "--seed", 3,
            "--arrival", "poisson", "--out", d / "curve.csv", "--trace", d / "trace.csv")
        outs.append(_bytes(d / "c.csv", d / "c.labels.csv", d / "curve.csv", d / "trace.csv"))
    assert outs[0] == outs[1]


@pytest.mark.slow
def test_train_detect_eval_roundtrip(tmp_path):
    corpus = tmp_path / "c.csv"
    run("datagen", "--weeks", 30, "--seed", 5, "--anomaly-rate", 0.3, "--out", corpus)
    cfg = tmp_path / "train.json"
    cfg.write_text(json.dumps({"learning_rate": 0.05, "batch_size": 128, "l2_coeff": 1e-5}))
    models = []
    for k in range(2):
        m = tmp_path / f"m{k}.json"
        assert run("train", "--corpus", corpus, "--seed", 2, "--epochs", 40,
                   "--config", cfg, "--out", m) == 0
        models.append(m)
    assert models[0].read_bytes() == models[1].read_bytes()

    pred = tmp_path / "pred.csv"
    assert run("detect", "--model", models[0], "--corpus", corpus, "--out", pred) == 0
    assert rows(pred)[0] == ["week_index", "label", "score"]
    scores_json = tmp_path / "s.json"
    assert run("eval", "--pred", pred, "--truth", tmp_path / "c.labels.csv",
               "--out", tmp_path / "s.csv", "--json", scores_json) == 0

    model = lgnb.load_model(models[0])
    ls = datagen.LabeledSeries(read_csv(corpus), *datagen.read_labels(tmp_path / "c.labels.csv"))
    windows = datagen.weekly_windows(ls)
    in_process = metrics.evaluate(model.predict(windows), lgnb.labels_of(windows))
    assert json.loads(scores_json.read_text())["scores"] == in_process.to_dict()


@pytest.mark.slow
def test_mlp_train_and_cv(tmp_path):
    corpus = tmp_path / "c.csv"
    run("datagen", "--weeks", 30, "--seed", 6, "--anomaly-rate", 0.3, "--out", corpus)
    model = tmp_path / "mlp.json"
    assert run("train", "--corpus", corpus, "--model", "mlp", "--seed", 0, "--epochs", 30,
               "--out", model) == 0
    pred = tmp_path / "p.csv"
    assert run("detect", "--model", model, "--corpus", corpus, "--out", pred) == 0
    cands = tmp_path / "cands.json"
    cands.write_text(json.dumps([{"learning_rate": 0.05, "epochs": 20},
                                 {"learning_rate": 0.01, "epochs": 20}]))
    cv = tmp_path / "cv.csv"
    assert run("eval", "--pred", pred, "--truth", tmp_path / "c.labels.csv", "--cv",
               "--corpus", corpus, "--model", "mlp", "--candidates", cands,
               "--cv-out", cv) == 0
    table = rows(cv)
    assert table[0] == ["candidate", "fold", "accuracy", "precision", "recall", "f_beta"]
    assert len(table) == 1 + 2 * 5
    assert np.all([0.0 <= float(r[5]) <= 1.0 for r in table[1:]])
