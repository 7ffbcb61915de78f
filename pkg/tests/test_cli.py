import csv
import json

import numpy as np
import pytest

from greenfood.cli import run
from greenfood.model import load_checkpoint


def write_json(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    synth_cfg = write_json(root / "synth.json", {"synth.users": 60, "synth.items": 150,
                                                 "synth.min_len": 8, "synth.max_len": 12})
    assert run(["synth", "--config", synth_cfg, "--out", str(root / "data"), "--seed", "3"]) == 0
    run_cfg = write_json(root / "run.json", {
        "interactions_path": "data/interactions.csv", "indicators_path": "data/indicators.csv",
        "min_interactions": 3, "d": 8, "w_max": 10, "max_epochs": 2, "batch_size": 32,
    })
    return root, run_cfg


def test_synth_writes_corpus(workspace):
    root, _ = workspace
    for name in ("interactions.csv", "indicators.csv", "indicators.spec.json", "metadata.json"):
        assert (root / "data" / name).exists()
    assert json.loads((root / "data" / "metadata.json").read_text())["seed"] == 3


def test_prepare_writes_filtered_corpus_and_manifest(workspace, capsys):
    root, cfg = workspace
    assert run(["prepare", "--config", cfg, "--out", str(root / "prep")]) == 0
    summary = json.loads((root / "prep" / "summary.json").read_text())
    assert json.loads(capsys.readouterr().out) == summary
    assert summary["users"] == 60 and summary["indicators"] == ["eis", "nis", "hmi"]
    rows = read_csv(root / "prep" / "splits.csv")
    assert len(rows) == summary["interactions"]
    per_user = {}
    for r in rows:
        per_user.setdefault(r["user_id"], []).append(r["split"])
    assert all(s[-2:] == ["valid", "test"] and set(s[:-2]) == {"train"} for s in per_user.values())


def test_stats_two_user_corpus(tmp_path):
    rows = [[u, i, t] for u, items in (("u1", [1, 2, 3, 4]), ("u2", [2, 3, 4, 5])) for t, i in enumerate(items)]
    with open(tmp_path / "i.csv", "w", newline="") as fh:
        csv.writer(fh).writerows([["user_id", "item_id", "timestamp"]] + rows)
    with open(tmp_path / "g.csv", "w", newline="") as fh:
        csv.writer(fh).writerows([["item_id", "eis", "nis"], [1, 100, 30], [2, 60, 50], [3, 80, 40],
                                  [4, 90, 45], [5, 70, 35]])
    cfg = write_json(tmp_path / "c.json", {"interactions_path": "i.csv", "indicators_path": "g.csv",
                                            "min_interactions": 1})
    assert run(["stats", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    table = read_csv(tmp_path / "o" / "user_profile.csv")
    assert len(table) == 2
    # training prefixes: u1 -> items 1, 2 ; u2 -> items 2, 3
    assert [(r["eis_user_id"], float(r["eis_mean"]), float(r["eis_var"])) for r in table] == [
        ("u2", 70.0, 100.0), ("u1", 80.0, 400.0)]
    assert [(r["nis_user_id"], float(r["nis_mean"])) for r in table] == [("u1", 40.0), ("u2", 45.0)]


def test_train_then_evaluate_reproduces_report(workspace):
    root, cfg = workspace
    out = root / "trained"
    assert run(["train", "--config", cfg, "--out", str(out), "--seed", "5"]) == 0
    for name in ("checkpoint.bin", "training_log.csv", "report.csv", "report.json"):
        assert (out / name).exists()
    log_rows = read_csv(out / "training_log.csv")
    assert [r["epoch"] for r in log_rows] == ["1", "2"]
    trained_csv = (out / "report.csv").read_bytes()
    trained_json = (out / "report.json").read_bytes()
    assert run(["evaluate", "--config", cfg, "--out", str(root / "evald"), "--seed", "5",
                "--set", f"checkpoint_path={out / 'checkpoint.bin'}"]) == 0
    assert (root / "evald" / "report.csv").read_bytes() == trained_csv
    assert (root / "evald" / "report.json").read_bytes() == trained_json
    assert len(read_csv(out / "report.csv")) == 3


def test_train_twice_is_bit_identical(workspace):
    root, cfg = workspace
    for name in ("a", "b"):
        assert run(["train", "--config", cfg, "--out", str(root / name), "--set", "max_epochs=1"]) == 0
    for f in ("checkpoint.bin", "report.csv", "report.json", "training_log.csv"):
        assert (root / "a" / f).read_bytes() == (root / "b" / f).read_bytes()
    config, params, extra = load_checkpoint(root / "a" / "checkpoint.bin")
    assert extra["metadata"]["seed"] == 0 and np.all(params["item_table"].value[0] == 0)


def test_ablate_alpha_sweep_rows(workspace):
    root, cfg = workspace
    out = root / "ablate"
    code = run(["ablate", "--config", cfg, "--out", str(out), "--kind", "alpha_sweep",
                "--set", "max_epochs=1", "--set", "grid.alpha=[1.0, 0.9, 0.8, 0.7, 0.6, 0.5]"])
    assert code == 0
    rows = read_csv(out / "ablation_alpha_sweep.csv")
    assert len(rows) == 18
    for cutoff in ("5", "10", "20"):
        alphas = [float(r["alpha"]) for r in rows if r["cutoff"] == cutoff]
        assert alphas == [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]


@pytest.mark.parametrize("argv, message", [
    (["bogus"], "invalid choice"),
    (["train", "--frobnicate"], "unrecognized"),
    (["train", "--set", "alpha=3"], "'alpha'"),
    (["train", "--set", "nope=1"], "unknown key"),
    (["train", "--kind", "alpha_sweep"], "--kind"),
    (["ablate"], "--kind"),
    (["ablate", "--kind", "alpha_sweep", "--set", "grid.alpha=[0.1]"], "outside"),
])
def test_validation_errors_exit_1(workspace, capsys, argv, message):
    root, cfg = workspace
    code = run(argv[:1] + ["--config", cfg, "--out", str(root / "err")] + argv[1:])
    assert code == 1
    assert message in capsys.readouterr().err


def test_usage_text_on_unknown_verb(workspace, capsys):
    root, cfg = workspace
    assert run(["bogus", "--config", cfg, "--out", str(root / "x")]) == 1
    assert "usage: greenfood" in capsys.readouterr().err


def test_missing_data_file_is_runtime_failure(tmp_path, capsys):
    cfg = write_json(tmp_path / "c.json", {"interactions_path": "none.csv", "indicators_path": "none.csv"})
    assert run(["prepare", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "FileNotFoundError" in capsys.readouterr().err


def test_inputs_are_not_mutated(workspace):
    root, cfg = workspace
    before = (root / "data" / "interactions.csv").read_bytes()
    assert run(["prepare", "--config", cfg, "--out", str(root / "prep2")]) == 0
    assert (root / "data" / "interactions.csv").read_bytes() == before
