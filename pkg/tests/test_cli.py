"""End-to-end command line coverage: happy paths, artifacts, exit codes."""

from __future__ import annotations

import hashlib
import json

import numpy as np
import pytest

from fairvote import ScoreTable, load_folds, load_score_table, save_score_table
from fairvote.cli import main
from fairvote.ensemble import load_ensemble


def sha256(path):
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# -- simulate ---------------------------------------------------------------------

def test_simulate_writes_table_and_manifest(tmp_path, capsys):
    out = tmp_path / "scores.csv"
    code = main(["simulate", "--out", str(out), "--groups", "a,b",
                 "--positives", "15,10", "--negatives", "15,10",
                 "--members", "3", "--seed", "4"])
    assert code == 0
    assert "50 samples x 3 members" in capsys.readouterr().out
    table = load_score_table(out)
    assert table.n_samples == 50
    assert table.n_members == 3
    assert table.group_names == ("a", "b")

    manifest = read_json(tmp_path / "scores.csv.manifest.json")
    assert manifest["tool"] == "fairvote"
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 4
    assert manifest["outputs"][str(out)] == sha256(out)
    assert "timestamp" not in manifest


def test_simulate_rejects_bad_configuration(tmp_path):
    out = tmp_path / "scores.csv"
    code = main(["simulate", "--out", str(out), "--groups", "a,b",
                 "--positives", "10", "--negatives", "10,10",
                 "--members", "2"])
    assert code == 1  # group/count arity mismatch
    code = main(["simulate", "--out", str(out), "--test-fraction", "1.0"])
    assert code == 14  # invalid synthesis configuration


# -- fit / predict / diagnose on the bundled fixture ---------------------------------

@pytest.fixture(scope="module")
def fitted(tmp_path_factory, fixture_path):
    """One fitted ensemble shared by the pipeline tests."""
    root = tmp_path_factory.mktemp("pipeline")
    ens = root / "ensemble.json"
    folds = root / "folds.csv"
    code = main(["fit", "--scores", fixture_path, "--out", str(ens),
                 "--constraint", "min-recall", "--bound", "0.6",
                 "--grid-resolution", "5", "--seed", "0",
                 "--folds-out", str(folds)])
    assert code == 0
    return root, ens, folds


def test_fit_artifacts(fitted, fixture_path, capsys):
    root, ens, folds = fitted
    payload = read_json(ens)
    assert payload["format"] == "fairvote-ensemble/1"
    assert len(payload["members"]) == 21
    assert all(m["constraint"] == {"kind": "min-recall", "bound": 0.6}
               for m in payload["members"])
    assert load_folds(folds).n_folds == 21

    manifest = read_json(root / "ensemble.json.manifest.json")
    assert manifest["command"] == "fit"
    assert manifest["parameters"]["grid_resolution"] == 5
    digest = "sha256:" + hashlib.sha256(
        open(fixture_path, "rb").read()).hexdigest()
    assert manifest["inputs"][fixture_path] == digest
    assert str(ens) in manifest["outputs"]


def test_predict_writes_vote_table(fitted, fixture_path, fixture_table,
                                   tmp_path, capsys):
    _, ens, _ = fitted
    out = tmp_path / "preds.csv"
    code = main(["predict", "--scores", fixture_path, "--ensemble", str(ens),
                 "--split", "test", "--out", str(out)])
    assert code == 0
    n_test = len(fixture_table.split_indices("test"))
    assert f"wrote {n_test} predictions" in capsys.readouterr().out

    lines = out.read_text().splitlines()
    assert lines[0] == "sample_id,votes,prediction"
    assert len(lines) == n_test + 1
    for line in lines[1:]:
        sid, votes, pred = line.split(",")
        assert 0 <= int(votes) <= 21
        assert pred in ("0", "1")
    assert (tmp_path / "preds.csv.manifest.json").exists()


def test_predict_split_all_covers_every_sample(fitted, fixture_path,
                                               fixture_table, tmp_path):
    _, ens, _ = fitted
    out = tmp_path / "preds_all.csv"
    assert main(["predict", "--scores", fixture_path, "--ensemble", str(ens),
                 "--split", "all", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == fixture_table.n_samples + 1


def test_diagnose_summarizes_restrictions(fitted, fixture_path, tmp_path):
    _, ens, _ = fitted
    out = tmp_path / "diag"
    code = main(["diagnose", "--scores", fixture_path, "--ensemble", str(ens),
                 "--split", "test", "--out", str(out)])
    assert code == 0
    summary = read_json(out / "summary.json")
    assert summary["split"] == "test"
    assert summary["n_members"] == 21
    assert isinstance(summary["groupwise_competent"], bool)

    entries = {e["restriction"]: e for e in summary["restrictions"]}
    for name in ("all", "positives", "negatives", "group-positives[a]",
                 "group-positives[b]"):
        assert name in entries
    ok = entries["all"]
    assert ok["status"] == "ok"
    for key in ("violation", "competent", "eir", "der", "lower_bound",
                "upper_bound", "certified_lower_bound", "bounds_hold",
                "curve_file"):
        assert key in ok
    curve = (out / ok["curve_file"]).read_text().splitlines()
    assert curve[0] == "t,c_value"
    assert len(curve) > 1
    assert (out / "manifest.json").exists()


def test_diagnose_requires_labels(tmp_path):
    scores = tmp_path / "scores.csv"
    assert main(["simulate", "--out", str(scores), "--members", "3",
                 "--positives", "8,8", "--negatives", "8,8",
                 "--seed", "6"]) == 0
    table = load_score_table(scores)
    labels = table.labels.copy()
    labels[table.splits == 2] = -1
    stripped = ScoreTable(table.group_names, list(table.sample_ids), labels,
                          table.groups, table.splits, table.task,
                          table.gscores)
    save_score_table(stripped, scores)

    ens = tmp_path / "ens.json"
    assert main(["fit", "--scores", str(scores), "--out", str(ens),
                 "--grid-resolution", "3"]) == 0
    code = main(["diagnose", "--scores", str(scores), "--ensemble", str(ens),
                 "--split", "test", "--out", str(tmp_path / "diag")])
    assert code == 11


def test_infeasible_bound_reports_fallback(fixture_path, tmp_path):
    ens = tmp_path / "tight.json"
    code = main(["fit", "--scores", fixture_path, "--out", str(ens),
                 "--constraint", "min-recall", "--bound", "0.999",
                 "--grid-resolution", "5", "--grid-range", "0.05"])
    assert code == 0
    payload = read_json(ens)
    diags = [m["diagnostics"] for m in payload["members"]]
    assert any(d["fallback_used"] for d in diags)
    assert all(d["fallback_used"] == (not d["feasible"]) for d in diags)


# -- fairauc ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_scores(tmp_path_factory):
    root = tmp_path_factory.mktemp("fairauc")
    path = root / "scores.csv"
    assert main(["simulate", "--out", str(path), "--members", "3",
                 "--positives", "20,12", "--negatives", "20,12",
                 "--recall", "0.9,0.6", "--seed", "8"]) == 0
    return path


def test_fairauc_artifacts(small_scores, tmp_path, capsys):
    out = tmp_path / "auc"
    code = main(["fairauc", "--scores", str(small_scores), "--out", str(out),
                 "--sweep", "0.5,0.7", "--grid-resolution", "5",
                 "--bootstrap-n", "25", "--seed", "0"])
    assert code == 0
    assert "fairauc constrained=" in capsys.readouterr().out

    payload = read_json(out / "fairauc.json")
    assert payload["kind"] == "min-recall"
    assert payload["select"] == "validation"
    assert payload["sweep"] == [0.5, 0.7]
    assert payload["bootstrap_n"] == 25
    assert payload["difference"] == pytest.approx(
        payload["constrained_fairauc"] - payload["unconstrained_fairauc"],
        abs=1e-12)
    assert payload["ci_low"] <= payload["ci_high"]
    assert len(payload["t_grid"]) == 51

    frontier = (out / "frontier.csv").read_text().splitlines()
    assert frontier[0] == "config,source,accuracy,fairness_value"
    configs = {line.split(",")[0] for line in frontier[1:]}
    assert {"min-recall@0.5", "min-recall@0.7", "unconstrained",
            "constant-positive"} == configs
    assert (out / "frontier_select.csv").exists()
    assert (out / "manifest.json").exists()


def test_fairauc_on_test_split_selects_directly(small_scores, tmp_path):
    out = tmp_path / "auc_test"
    code = main(["fairauc", "--scores", str(small_scores), "--out", str(out),
                 "--sweep", "0.5", "--grid-resolution", "5",
                 "--bootstrap-n", "10", "--select", "test"])
    assert code == 0
    payload = read_json(out / "fairauc.json")
    assert payload["select"] == "test"
    assert not (out / "frontier_select.csv").exists()


# -- samplesize -------------------------------------------------------------------------

def test_samplesize_stdout_and_file(tmp_path, capsys):
    assert main(["samplesize", "--m", "39", "--n", "39"]) == 0
    text = capsys.readouterr().out
    assert "p_min=" in text
    assert "0.68" in text
    assert "large_counts=" in text

    out = tmp_path / "size.txt"
    assert main(["samplesize", "--m", "39", "--n", "39",
                 "--out", str(out)]) == 0
    assert out.read_text() == capsys.readouterr().out
    assert (tmp_path / "size.txt.manifest.json").exists()


# -- exit codes ---------------------------------------------------------------------------

def test_exit_codes(fixture_path, tmp_path):
    ens = tmp_path / "e.json"
    # malformed / missing input file
    assert main(["fit", "--scores", str(tmp_path / "missing.csv"),
                 "--out", str(ens)]) == 10
    # fold count must match members
    assert main(["fit", "--scores", fixture_path, "--out", str(ens),
                 "--folds", "5"]) == 40
    # even grid resolution
    assert main(["fit", "--scores", fixture_path, "--out", str(ens),
                 "--grid-resolution", "100"]) == 30
    # alpha and base-rate domains
    assert main(["samplesize", "--m", "10", "--n", "10",
                 "--alpha", "1.5"]) == 60
    assert main(["samplesize", "--m", "10", "--n", "10",
                 "--base-rate", "0"]) == 61


def test_group_set_mismatch_exit_code(fixture_path, tmp_path):
    other = tmp_path / "other.csv"
    assert main(["simulate", "--out", str(other), "--groups", "c,d",
                 "--members", "3", "--positives", "8,8",
                 "--negatives", "8,8", "--seed", "9"]) == 0
    ens = tmp_path / "other_ens.json"
    assert main(["fit", "--scores", str(other), "--out", str(ens),
                 "--grid-resolution", "3"]) == 0
    code = main(["predict", "--scores", fixture_path, "--ensemble", str(ens),
                 "--out", str(tmp_path / "p.csv")])
    assert code == 41


def test_usage_errors_exit_with_2():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--out", "x.csv", "--mode", "fancy"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["fit"])  # required arguments missing
    assert exc.value.code == 2
