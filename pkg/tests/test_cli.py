import json
import subprocess
import sys

import numpy as np
import pytest

from memmatch import cli, training
from memmatch.data import load_dataset, read_pwm
from memmatch.model import ModelParams


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def corpus(tmp_path):
    tr, va = tmp_path / "train.tsv", tmp_path / "val.tsv"
    assert run("synth", "--motif", "ACGTA", "--n", 60, "--t", 14, "--seed", 1, "--out", tr) == 0
    assert run("synth", "--motif", "ACGTA", "--n", 30, "--t", 14, "--seed", 2, "--out", va) == 0
    return tr, va


def test_synth_is_seeded(tmp_path, capsys):
    a, b = tmp_path / "a.tsv", tmp_path / "b.fa"
    run("synth", "--motif", "TGACGTA", "--n", 20, "--t", 30, "--seed", 7, "--out", a)
    run("synth", "--motif", "TGACGTA", "--n", 20, "--t", 30, "--seed", 7, "--out", b)
    assert "wrote 20 records" in capsys.readouterr().out
    ra, rb = load_dataset(a), load_dataset(b, "fasta")
    assert [(r.seq, r.label) for r in ra] == [(r.seq, r.label) for r in rb]
    assert all("TGACGTA" in r.seq for r in ra if r.label == 1)


def test_train_eval_visualize(corpus, tmp_path, capsys):
    tr, va = corpus
    model, hist = tmp_path / "m.json", tmp_path / "h.jsonl"
    code = run("train", "--data", tr, "--val", va, "--ell", 2, "--p", 2, "--d", 4,
               "--epochs", 2, "--batch-size", 16, "--seed", 3, "--out", model, "--history", hist)
    assert code == 0
    assert len(hist.read_text().splitlines()) == 2
    assert ModelParams.load(model).hp.t == 14

    scores = tmp_path / "scores.tsv"
    assert run("eval", "--model", model, "--data", va, "--scores", scores) == 0
    out = capsys.readouterr().out
    assert out.strip().splitlines()[-1].startswith("auc=")
    rows = [line.split("\t") for line in scores.read_text().splitlines()]
    assert len(rows) == 30 and all(len(r) == 3 and 0 <= float(r[2]) <= 1 for r in rows)

    trace, svg = tmp_path / "t.json", tmp_path / "t.svg"
    assert run("visualize", "--model", model, "--seq", "acgtaacgtaacgt", "--out", trace, "--svg", svg) == 0
    doc = json.loads(trace.read_text())
    assert doc["sequence"] == "ACGTAACGTAACGT" and len(doc["memory_weights"]) == 2
    assert svg.read_text().startswith("<svg")


def test_gridsearch(corpus, tmp_path, capsys):
    tr, va = corpus
    out = tmp_path / "grid.json"
    code = run("gridsearch", "--data", tr, "--val", va, "--grid", "ell=1,2;p=2;d=4", "--epochs", 1, "--out", out)
    assert code == 0
    rows = json.loads(out.read_text())
    assert [(r["ell"], r["p"], r["d"]) for r in rows] in ([(1, 2, 4), (2, 2, 4)], [(2, 2, 4), (1, 2, 4)])
    assert "points=2" in capsys.readouterr().out


def test_baseline_pwm(tmp_path, capsys):
    tr, te = tmp_path / "tr.tsv", tmp_path / "te.tsv"
    run("synth", "--motif", "TGACGTA", "--n", 200, "--t", 50, "--seed", 1, "--out", tr)
    run("synth", "--motif", "TGACGTA", "--n", 200, "--t", 50, "--seed", 2, "--out", te)
    pwm_path = tmp_path / "m.pwm"
    assert run("baseline-pwm", "--train", tr, "--width", 7, "--data", te, "--pwm-out", pwm_path) == 0
    out = capsys.readouterr().out
    assert "consensus=TGACGTA" in out
    assert float(out.strip().splitlines()[-1].split("=")[1]) > 0.99
    assert read_pwm(pwm_path).width == 7


def test_report(tmp_path, capsys):
    path = tmp_path / "aucs.tsv"
    rows = [("MMN", f"d{i}", 0.8 + 0.05 * i) for i in range(3)] + [("PWM", f"d{i}", 0.7 + 0.04 * i) for i in range(3)]
    path.write_text("".join(f"{m}\t{n}\t{v}\n" for m, n, v in rows))
    assert run("report", "--aucs", path) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("Model")
    assert "MMN" in out and "PWM" in out and "paired t-test MMN vs PWM" in out


def test_report_simple_rows(tmp_path, capsys):
    path = tmp_path / "aucs.tsv"
    path.write_text("a\t0.8\nb\t0.9\nc\t1.0\n")
    assert run("report", "--aucs", path) == 0
    assert "0.900" in capsys.readouterr().out


class TestExitCodes:
    def test_missing_file(self, tmp_path):
        assert run("eval", "--model", tmp_path / "nope.json", "--data", tmp_path / "nope.tsv") == 1

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.tsv"
        bad.write_text("ACGX\t1\n")
        assert run("baseline-pwm", "--train", bad, "--width", 2, "--data", bad) == 1
        assert "line 1" in capsys.readouterr().err

    def test_usage_error(self):
        assert run("train") == 1

    def test_bad_grid(self, corpus, tmp_path):
        tr, va = corpus
        assert run("gridsearch", "--data", tr, "--val", va, "--grid", "ell=2", "--out", tmp_path / "g.json") == 1

    def test_numeric_failure(self, corpus, tmp_path, monkeypatch, capsys):
        def poisoned(params, codes, labels):
            return float("nan"), {name: np.zeros_like(a) for name, a in params.arrays.items()}

        monkeypatch.setattr(training, "gradients", poisoned)
        tr, va = corpus
        code = run("train", "--data", tr, "--val", va, "--ell", 2, "--p", 2, "--d", 4, "--out", tmp_path / "m.json")
        assert code == 2
        assert "batch 0" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    out = tmp_path / "x.tsv"
    proc = subprocess.run([sys.executable, "-m", "memmatch", "synth", "--n", "4", "--t", "5", "--plant-rate", "0", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(out.read_text().splitlines()) == 4
    assert np.all([len(line.split("\t")[0]) == 5 for line in out.read_text().splitlines()])
