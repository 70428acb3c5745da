import json

import pytest
import yaml

from savanna import corpus, evalharness, instruct, preference_loss
from savanna.cli import main
from savanna.corpus import ParallelPair, make_document


def write_yaml(path, payload):
    path.write_text(yaml.safe_dump(payload))
    return str(path)


@pytest.fixture()
def suite_csv(tmp_path):
    suite = evalharness.synthetic_suite(languages=("aaa", "bbb"), seed=5)
    path = tmp_path / "suite.csv"
    evalharness.save_suite(suite, path)
    return str(path)


class TestCorpusCommand:
    def test_end_to_end(self, tmp_path, capsys):
        docs = [
            make_document("lug", "omwana agenda mu kibuga", "web"),
            make_document("lug", "omwana agenda mu kibuga", "web"),  # exact dup
            make_document("lug", "ekitabo ekinene\n17\nky'omusomesa", "book_ocr"),
        ]
        inputs = tmp_path / "docs.jsonl"
        corpus.write_documents_jsonl(docs, inputs)
        config = write_yaml(tmp_path / "c.yaml", {"inputs": [str(inputs)]})
        out = tmp_path / "out"
        assert main(["corpus", "--config", config, "--out", str(out)]) == 0

        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["cleaning"]["artifacts_removed"] == 1  # the page number
        assert manifest["reduction_ratio"] < 1.0
        assert (out / "resolved_config.yaml").exists()
        result = corpus.read_documents_jsonl(out / "documents.jsonl")
        assert len(result) == 2
        assert all("17" not in d.text for d in result)

    def test_lock_prevents_concurrent_runs(self, tmp_path):
        out = tmp_path / "out"
        out.mkdir()
        (out / ".savanna.lock").touch()
        config = write_yaml(tmp_path / "c.yaml", {"inputs": []})
        assert main(["corpus", "--config", config, "--out", str(out)]) == 1

    def test_missing_inputs_key_fails_cleanly(self, tmp_path, capsys):
        config = write_yaml(tmp_path / "c.yaml", {})
        assert main(["corpus", "--config", config, "--out", str(tmp_path / "o")]) == 1
        err = json.loads(capsys.readouterr().err)
        assert err["type"] == "KeyError"


class TestInstructCommand:
    def test_end_to_end(self, tmp_path):
        pairs = [ParallelPair("lug", "eng", f"gamba {i}", f"say {i}") for i in range(8)]
        parallel = tmp_path / "pairs.jsonl"
        corpus.write_pairs_jsonl(pairs, parallel)
        config = write_yaml(tmp_path / "c.yaml", {
            "parallel": str(parallel),
            "n_translation": 8,
            "max_len": 128,
            "tokens_per_batch": 1024,
        })
        out = tmp_path / "out"
        assert main(["instruct", "--config", config, "--out", str(out)]) == 0

        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["category_counts"]["translation"] == 8
        assert manifest["sequences_per_batch"] == 8
        examples = instruct.read_instructions_jsonl(out / "instructions.jsonl")
        assert len(examples) == 8
        packed, max_len = instruct.read_packed_jsonl(out / "packed.jsonl")
        assert max_len == 128
        assert all(len(s.token_ids) <= 128 for s in packed)


class TestEvalCommand:
    def test_echo_run_and_rescore(self, tmp_path, suite_csv):
        out = tmp_path / "out"
        assert main(["eval", "--suite", suite_csv, "--endpoint", "stub:echo",
                     "--directions", "aaa-eng,eng-aaa", "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["invalid"] is False
        assert report["total_failed"] == 0
        for d in report["directions"]:
            assert d["aggregates"]["chrf"] == pytest.approx(1.0)

        out2 = tmp_path / "rescored"
        assert main(["eval", "--suite", suite_csv,
                     "--rescore", str(out / "run_log.jsonl"), "--out", str(out2)]) == 0
        assert (out2 / "report.json").read_bytes() == (out / "report.json").read_bytes()

    def test_document_granularity_flag(self, tmp_path, suite_csv):
        out = tmp_path / "out"
        assert main(["eval", "--suite", suite_csv, "--endpoint", "stub:echo",
                     "--directions", "bbb-eng", "--granularity", "document",
                     "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["directions"][0]["evaluated"] == 20

    def test_invalid_direction_fails(self, tmp_path, suite_csv, capsys):
        assert main(["eval", "--suite", suite_csv, "--endpoint", "stub:echo",
                     "--directions", "aaa-bbb", "--out", str(tmp_path / "o")]) == 1
        err = json.loads(capsys.readouterr().err)
        assert "eng" in err["error"]

    def test_missing_endpoint_fails(self, tmp_path, suite_csv, capsys):
        assert main(["eval", "--suite", suite_csv, "--directions", "aaa-eng",
                     "--out", str(tmp_path / "o")]) == 1
        err = json.loads(capsys.readouterr().err)
        assert "endpoint" in err["error"]


class TestReportCommand:
    def test_published_reference_report(self, tmp_path):
        out = tmp_path / "out"
        config = write_yaml(tmp_path / "c.yaml", {
            "winner_models": ["sunflower-14b", "gemini-2.5-pro", "gpt-4o",
                              "deepseek-chat", "grok-3"],
        })
        assert main(["report", "--config", config, "--out", str(out)]) == 0
        counts = json.loads((out / "winner_counts.json").read_text())
        assert counts["sunflower-14b"] == 24
        mean_table = (out / "mean_table.md").read_text()
        assert "sunflower-32b" in mean_table and "0.435" in mean_table
        assert (out / "per_language_xx-eng.md").exists()
        assert (out / "chart.csv").exists()

    def test_run_log_report(self, tmp_path, suite_csv):
        eval_out = tmp_path / "eval"
        main(["eval", "--suite", suite_csv, "--endpoint", "stub:echo",
              "--directions", "aaa-eng,eng-aaa", "--out", str(eval_out)])
        config = write_yaml(tmp_path / "c.yaml", {
            "use_published_reference": False,
            "runs": [{"model": "echo", "suite": suite_csv,
                      "run_log": str(eval_out / "run_log.jsonl")}],
        })
        out = tmp_path / "report"
        assert main(["report", "--config", config, "--out", str(out)]) == 0
        counts = json.loads((out / "winner_counts.json").read_text())
        assert counts == {"echo": 1}


class TestLossCommand:
    def test_audit(self, tmp_path, capsys):
        pairs = [preference_loss.PairLogps([-0.5, -1.5], [-2.0], [-0.5, -1.5], [-2.0])]
        path = tmp_path / "pairs.jsonl"
        preference_loss.write_pair_logps_jsonl(pairs, path)
        out = tmp_path / "out"
        assert main(["loss", "--pairs", str(path), "--out", str(out)]) == 0
        audit = json.loads((out / "loss_audit.json").read_text())
        assert audit["mean_dpo_loss"] == pytest.approx(0.6931471805599453)
        assert audit["mean_irpo_loss"] == pytest.approx(1.6931471805599454)
        assert "mean irpo: 1.693147" in capsys.readouterr().out

    def test_missing_pairs_file(self, tmp_path, capsys):
        assert main(["loss", "--pairs", str(tmp_path / "nope.jsonl"),
                     "--out", str(tmp_path / "o")]) == 1
        err = json.loads(capsys.readouterr().err)
        assert err["type"] == "FileNotFoundError"


class TestSeedHandling:
    def test_seed_flag_overrides_config(self, tmp_path):
        docs = [make_document("lug", f"ekigambo {i} mu lukalala", "web") for i in range(20)]
        inputs = tmp_path / "docs.jsonl"
        corpus.write_documents_jsonl(docs, inputs)
        config = write_yaml(tmp_path / "c.yaml",
                            {"inputs": [str(inputs)], "seed": 1, "sample_size": 5})
        out = tmp_path / "out"
        assert main(["corpus", "--config", config, "--seed", "9", "--out", str(out)]) == 0
        resolved = yaml.safe_load((out / "resolved_config.yaml").read_text())
        assert resolved["seed"] == 9
