import json

import pytest

from crickwin.cli import run
from crickwin.ingest import DatasetSplit, write_manifest, write_corpus_dir
from crickwin.jsonio import load_path
from crickwin.synth import synthetic_corpus


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    write_corpus_dir(synthetic_corpus(n_matches=10, seed=51), d)
    return d


@pytest.fixture(scope="module")
def manifest(tmp_path_factory, corpus_dir):
    out = tmp_path_factory.mktemp("work") / "manifest.json"
    code = run(["--quiet", "ingest", "--corpus", str(corpus_dir), "--out", str(out),
                "--ratio", "0.8", "--seed", "7"])
    assert code == 0
    return out


TINY = [
    "--set", "model.embed_dim=8",
    "--set", "model.hidden_dim=8",
    "--set", "model.epochs=1",
    "--set", "model.accumulate=4",
]


class TestIngest:
    def test_manifest_written(self, manifest):
        doc = load_path(manifest)
        assert doc["format_version"] == 1
        assert len(doc["matches"]) == 10
        assert len(doc["split"]["train_ids"]) == 8
        assert "config_sha256" in doc["provenance"]

    def test_unknown_subcommand_is_usage_error(self):
        assert run(["frobnicate"]) == 1

    def test_no_subcommand_is_usage_error(self):
        assert run([]) == 1


class TestTrain:
    def test_train_eval_predict_pipeline(self, manifest, tmp_path):
        ckpt = tmp_path / "ckpt.json"
        code = run(["--quiet", *TINY, "train", "--manifest", str(manifest),
                    "--out", str(ckpt)])
        assert code == 0
        doc = load_path(ckpt)
        assert doc["format_version"] == 1
        assert "manifest_sha256" in doc["provenance"]

        report = tmp_path / "report"
        code = run(["--quiet", *TINY, "eval", "--checkpoint", str(ckpt),
                    "--manifest", str(manifest), "--at-ball", "300",
                    "--out", str(report)])
        assert code == 0
        rep = load_path(report.with_suffix(".json"))
        assert rep["rows"][0]["J"] == 300
        assert "config_sha256" in rep["provenance"]
        assert report.with_suffix(".csv").read_text().startswith("J,train_acc,test_acc,n")

        curve = tmp_path / "curve"
        code = run(["--quiet", *TINY, "curve", "--checkpoint", str(ckpt),
                    "--manifest", str(manifest), "--at-balls", "6,150,300",
                    "--out", str(curve)])
        assert code == 0
        assert [r["J"] for r in load_path(curve.with_suffix(".json"))["rows"]] == [6, 150, 300]

        match_id = load_path(manifest)["matches"][0]["match_id"]
        code = run(["--quiet", "predict", "--checkpoint", str(ckpt),
                    "--manifest", str(manifest), "--match-id", match_id,
                    "--at-ball", "120"])
        assert code == 0

    def test_empty_manifest_is_data_error(self, tmp_path):
        empty = tmp_path / "empty.json"
        write_manifest(empty, [], DatasetSplit([], [], 7, 0.8))
        assert run(["--quiet", *TINY, "train", "--manifest", str(empty)]) == 2

    def test_missing_manifest_is_data_error(self, tmp_path):
        assert run(["--quiet", "train", "--manifest", str(tmp_path / "nope.json")]) == 2


class TestPrematchCommand:
    def test_trains_and_saves_bundle(self, manifest, tmp_path):
        out = tmp_path / "prematch.json"
        code = run(["--quiet", "prematch", "--manifest", str(manifest),
                    "--out", str(out), "--kind", "gbt",
                    "--set", "prematch.rounds=3"])
        assert code == 0
        doc = load_path(out)
        assert doc["kind"] == "gbt"
        assert "vocabularies" in doc

    def test_compare_smoke(self, manifest, tmp_path):
        out = tmp_path / "compare.json"
        code = run(["--quiet", *TINY, "compare", "--manifest", str(manifest),
                    "--at-balls", "300", "--kinds", "per_ball,cumulative",
                    "--out", str(out)])
        assert code == 0
        doc = load_path(out)
        assert [r["variant"] for r in doc["rows"]] == ["per_ball", "cumulative"]

    def test_ablation_smoke(self, manifest, tmp_path):
        bundle = tmp_path / "pm.json"
        assert run(["--quiet", "prematch", "--manifest", str(manifest),
                    "--out", str(bundle), "--set", "prematch.rounds=2"]) == 0
        out = tmp_path / "ablation.json"
        code = run(["--quiet", *TINY, "ablate", "--manifest", str(manifest),
                    "--prematch-model", str(bundle), "--at-balls", "300",
                    "--out", str(out)])
        assert code == 0
        doc = load_path(out)
        assert [r["stage"] for r in doc["rows"]] == ["baseline", "prematch", "target", "wickets"]


class TestConfig:
    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"modle": {}}))
        assert run(["--config", str(cfg), "ingest"]) == 1

    def test_unknown_set_key_rejected(self, manifest):
        assert run(["--set", "model.hidden_dims=8", "train",
                    "--manifest", str(manifest)]) == 1

    def test_config_file_with_overrides(self, tmp_path, corpus_dir):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"split": {"ratio": 0.5}}))
        out = tmp_path / "m.json"
        code = run(["--quiet", "--config", str(cfg), "--set", "split.seed=3",
                    "ingest", "--corpus", str(corpus_dir), "--out", str(out)])
        assert code == 0
        doc = load_path(out)
        assert doc["split"]["ratio"] == 0.5
        assert doc["split"]["seed"] == 3
