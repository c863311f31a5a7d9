from __future__ import annotations

import json
import shutil
import subprocess
import sys

import pytest

from repoprompt.cli import run_command

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory, minirepo_root):
    """index -> mine -> label -> train, all through the CLI."""
    out = tmp_path_factory.mktemp("cliout")
    base = [
        "--repo-root", str(minirepo_root), "--out", str(out),
        "--tokenizer", "fallback", "--budget", "256", "--seed", "0",
    ]
    assert run_command(["index", *base]) == 0
    assert run_command(["mine", *base, "--cap", "12"]) == 0
    assert run_command(["label", *base]) == 0
    assert run_command(["train", *base, "--variant", "h", "--epochs", "3"]) == 0
    return out, base


class TestPipeline:
    def test_state_files_exist(self, pipeline):
        out, _ = pipeline
        for name in (
            "repo_index.minirepo.json", "dataset.jsonl", "labels.jsonl",
            "checkpoint.h.json",
        ):
            assert (out / name).exists(), name

    def test_dataset_has_capped_train_holes(self, pipeline):
        out, _ = pipeline
        records = [json.loads(l) for l in (out / "dataset.jsonl").read_text().splitlines()]
        assert len(records) == 12
        assert all(r["split"] == "train" for r in records)
        assert all(r["repo_id"] == "minirepo" for r in records)

    def test_labels_sorted_by_hole_id(self, pipeline):
        out, _ = pipeline
        ids = [
            json.loads(l)["hole_id"]
            for l in (out / "labels.jsonl").read_text().splitlines()
        ]
        assert ids == sorted(ids)
        assert len(ids) == 12

    def test_predict_writes_topk(self, pipeline, capsys):
        out, base = pipeline
        assert run_command(["predict", *base, "--variant", "h", "-k", "5"]) == 0
        lines = (out / "predictions.h.jsonl").read_text().splitlines()
        assert len(lines) == 12
        for line in lines:
            doc = json.loads(line)
            props = doc["proposals"]
            assert 1 <= len(props) <= 5
            assert len(set(props)) == len(props)
            assert all(0 <= p <= 62 for p in props)
        assert "predictions.h.jsonl" in capsys.readouterr().out

    def test_evaluate_default_writes_report_and_figure(self, pipeline, capsys):
        out, base = pipeline
        assert run_command(["evaluate", *base, "--method", "default"]) == 0
        doc = json.loads((out / "eval.default.json").read_text())
        assert doc["method"] == "default"
        assert 0.0 <= doc["sr_holewise"] <= 1.0
        assert len(doc["records"]) == 12
        assert (out / "eval.default.png").read_bytes().startswith(PNG_MAGIC)
        stdout = capsys.readouterr().out
        assert "sr_holewise" in stdout and "default" in stdout

    def test_evaluate_selector_uses_checkpoint(self, pipeline):
        out, base = pipeline
        assert run_command(["evaluate", *base, "--method", "selector-h"]) == 0
        doc = json.loads((out / "eval.selector-h.json").read_text())
        assert doc["method"] == "selector-h"
        chosen = {r["chosen_id"] for r in doc["records"]}
        assert chosen <= set(range(63))

    def test_evaluate_oracle_needs_labels_from_out_dir(self, pipeline):
        out, base = pipeline
        assert run_command(["evaluate", *base, "--method", "oracle"]) == 0
        doc = json.loads((out / "eval.oracle.json").read_text())
        default_doc = json.loads((out / "eval.default.json").read_text())
        assert doc["sr_holewise"] >= default_doc["sr_holewise"]

    def test_attempts_fixed_curve(self, pipeline, capsys):
        out, base = pipeline
        assert run_command(
            ["attempts", *base, "--ranking", "fixed", "--k-values", "1,4,63"]
        ) == 0
        doc = json.loads((out / "attempts.json").read_text())
        assert doc["ranking"] == "fixed"
        ks = [k for k, _ in doc["points"]]
        srs = [sr for _, sr in doc["points"]]
        assert ks == [1, 4, 63]
        assert srs == sorted(srs)
        assert (out / "attempts.png").read_bytes().startswith(PNG_MAGIC)
        assert "k=63" in capsys.readouterr().out.replace(" ", "")

    def test_compose_eval(self, pipeline, capsys):
        out, base = pipeline
        assert run_command(["compose-eval", *base, "--compose-l", "2"]) == 0
        doc = json.loads((out / "compose_eval.json").read_text())
        assert doc["l"] == 2 and doc["variant"] == "h"
        assert 0.0 <= doc["sr"] <= 1.0
        assert len(doc["holes"]) == 12
        for row in doc["holes"]:
            assert 1 <= len(row["proposals"]) <= 2
        assert "sr=" in capsys.readouterr().out


class TestDeterminism:
    def test_mine_is_byte_identical_across_runs(self, tmp_path, minirepo_root):
        out = tmp_path / "runs"
        base = ["--repo-root", str(minirepo_root), "--out", str(out)]
        assert run_command(["index", *base]) == 0
        assert run_command(["mine", *base, "--cap", "20", "--seed", "7"]) == 0
        first = (out / "dataset.jsonl").read_bytes()
        assert run_command(["mine", *base, "--cap", "20", "--seed", "7"]) == 0
        assert (out / "dataset.jsonl").read_bytes() == first

    def test_seed_changes_mined_holes(self, tmp_path, minirepo_root):
        out = tmp_path / "runs"
        base = ["--repo-root", str(minirepo_root), "--out", str(out)]
        assert run_command(["index", *base]) == 0
        assert run_command(["mine", *base, "--cap", "20", "--seed", "7"]) == 0
        first = (out / "dataset.jsonl").read_bytes()
        assert run_command(["mine", *base, "--cap", "20", "--seed", "8"]) == 0
        assert (out / "dataset.jsonl").read_bytes() != first


class TestConfigMerge:
    def test_config_file_beats_defaults_and_flags_beat_config(
        self, tmp_path, minirepo_root
    ):
        out = tmp_path / "cfgout"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "repo_root": str(minirepo_root),
            "out": str(out),
            "tokenizer": "fallback",
            "cap": 5,
        }))
        assert run_command(["index", "--config", str(cfg)]) == 0
        assert (out / "repo_index.minirepo.json").exists()
        assert run_command(["mine", "--config", str(cfg)]) == 0
        assert len((out / "dataset.jsonl").read_text().splitlines()) == 5
        assert run_command(["mine", "--config", str(cfg), "--cap", "3"]) == 0
        assert len((out / "dataset.jsonl").read_text().splitlines()) == 3

    def test_unreadable_config_fails(self, tmp_path, capsys):
        missing = tmp_path / "nope.json"
        assert run_command(["index", "--config", str(missing)]) == 1
        assert "cannot read config" in capsys.readouterr().err

    def test_repo_id_flag_renames_repo(self, tmp_path, minirepo_root):
        out = tmp_path / "runs"
        assert run_command([
            "index", "--repo-root", str(minirepo_root),
            "--repo-id", "alpha", "--out", str(out),
        ]) == 0
        assert (out / "repo_index.alpha.json").exists()


class TestSplits:
    def test_splits_flag_assigns_and_filters(self, tmp_path, minirepo_root, capsys):
        out = tmp_path / "runs"
        base = ["--repo-root", str(minirepo_root), "--out", str(out)]
        assert run_command(["index", *base]) == 0
        assert run_command(
            ["mine", *base, "--cap", "6", "--splits", "minirepo=val"]
        ) == 0
        records = [json.loads(l) for l in (out / "dataset.jsonl").read_text().splitlines()]
        assert all(r["split"] == "val" for r in records)
        capsys.readouterr()
        assert run_command(["label", *base, "--split", "train"]) == 1
        assert "no holes in the requested split" in capsys.readouterr().err

    def test_splits_missing_repo_rejected(self, tmp_path, minirepo_root, capsys):
        out = tmp_path / "runs"
        base = ["--repo-root", str(minirepo_root), "--out", str(out)]
        assert run_command(["index", *base]) == 0
        assert run_command(["mine", *base, "--splits", "other=train"]) == 1
        assert "missing repo" in capsys.readouterr().err


class TestExitCodes:
    def test_usage_errors_exit_two(self):
        with pytest.raises(SystemExit) as exc:
            run_command(["frobnicate"])
        assert exc.value.code == 2
        with pytest.raises(SystemExit) as exc:
            run_command(["evaluate", "--method", "bogus"])
        assert exc.value.code == 2
        with pytest.raises(SystemExit) as exc:
            run_command([])
        assert exc.value.code == 2

    def test_missing_prerequisites_name_the_command(
        self, tmp_path, minirepo_root, capsys
    ):
        out = tmp_path / "fresh"
        base = ["--repo-root", str(minirepo_root), "--out", str(out)]
        assert run_command(["mine", *base]) == 1
        assert "repoprompt index" in capsys.readouterr().err
        assert run_command(["index", *base]) == 0
        capsys.readouterr()
        assert run_command(["label", *base]) == 1
        assert "repoprompt mine" in capsys.readouterr().err
        assert run_command(["mine", *base, "--cap", "4"]) == 0
        capsys.readouterr()
        assert run_command(["train", *base]) == 1
        assert "repoprompt label" in capsys.readouterr().err
        assert run_command(["label", *base, "--tokenizer", "fallback"]) == 0
        capsys.readouterr()
        assert run_command(["predict", *base]) == 1
        assert "repoprompt train --variant h" in capsys.readouterr().err

    def test_no_repo_root_exits_one(self, tmp_path, capsys):
        assert run_command(["index", "--out", str(tmp_path / "x")]) == 1
        assert "--repo-root" in capsys.readouterr().err

    def test_bad_repo_root_exits_one(self, tmp_path, capsys):
        assert run_command(
            ["index", "--repo-root", str(tmp_path / "ghost"), "--out", str(tmp_path)]
        ) == 1
        assert "not a directory" in capsys.readouterr().err

    def test_stale_index_detected(self, tmp_path, minirepo_root, capsys):
        repo = tmp_path / "repocopy"
        shutil.copytree(minirepo_root, repo)
        out = tmp_path / "runs"
        base = ["--repo-root", str(repo), "--out", str(out)]
        assert run_command(["index", *base]) == 0
        target = repo / "src" / "com" / "acme" / "util" / "Clock.java"
        target.write_text(target.read_text() + "\n// touched\n")
        assert run_command(["mine", *base]) == 1
        assert "stale" in capsys.readouterr().err


def test_console_script_help():
    proc = subprocess.run(
        [sys.executable, "-m", "repoprompt.cli", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "repoprompt" in proc.stdout
    for command in ("index", "mine", "label", "train", "predict", "evaluate"):
        assert command in proc.stdout
