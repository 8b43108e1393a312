import json
from pathlib import Path

import pytest

from toneshift.cli import main


def run_pipeline(outdir, extra=()):
    return main([
        "pipeline", "--outdir", str(outdir), "--threads", "30",
        "--epochs", "2", *extra,
    ])


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("pipeline")
    assert run_pipeline(outdir) == 0
    return outdir


class TestPipeline:
    def test_all_artifacts_produced(self, pipeline_dir):
        for name in (
            "corpus.jsonl", "segments.jsonl", "segments_scored.jsonl",
            "embeddings.cache", "split.json", "model.ckpt", "train_history.json",
            "baselines.json", "report.json", "report.txt",
        ):
            assert (pipeline_dir / name).exists(), name
        assert (pipeline_dir / "plots" / "density.csv").exists()
        assert (pipeline_dir / "plots" / "scatter.csv").exists()

    def test_rerun_skips_stages(self, pipeline_dir, capsys):
        before = (pipeline_dir / "report.json").stat().st_mtime_ns
        assert run_pipeline(pipeline_dir) == 0
        out = capsys.readouterr().out
        assert "[skip]" in out and "[run ]" not in out
        assert (pipeline_dir / "report.json").stat().st_mtime_ns == before

    def test_reports_byte_identical_across_fresh_runs(self, pipeline_dir, tmp_path):
        other = tmp_path / "again"
        assert run_pipeline(other) == 0
        for name in ("split.json", "train_history.json", "report.json"):
            assert (other / name).read_bytes() == (pipeline_dir / name).read_bytes(), name

    def test_report_structure(self, pipeline_dir):
        report = json.loads((pipeline_dir / "report.json").read_text())
        assert "model" in report["scores"]["ALL"]
        for predictor in ("mean", "last", "unchanged", "gbt"):
            assert predictor in report["scores"]["ALL"]
        assert len(report["subsets"]) == 6

    def test_history_records_seed_and_config(self, pipeline_dir):
        history = json.loads((pipeline_dir / "train_history.json").read_text())
        assert history["seed"] == 0
        assert history["config"]["fc_out"] == 2
        assert len(history["epochs"]) >= 1

    def test_input_change_triggers_rerun(self, pipeline_dir, tmp_path, capsys):
        clone = tmp_path / "clone"
        run_pipeline(clone)
        capsys.readouterr()
        dump = clone / "synthetic_dump.jsonl"
        dump.write_text(dump.read_text() + "\n")
        run_pipeline(clone)
        out = capsys.readouterr().out
        assert "[run ] ingest" in out


class TestSubcommands:
    def test_synth_and_ingest(self, tmp_path):
        dump = tmp_path / "dump.jsonl"
        assert main(["synth", "--out", str(dump), "--threads", "5"]) == 0
        out = tmp_path / "corpus.jsonl"
        assert main(["ingest", "--input", str(dump), "--out", str(out)]) == 0
        assert out.exists()

    def test_select_score_split(self, tmp_path):
        dump = tmp_path / "dump.jsonl"
        main(["synth", "--out", str(dump), "--threads", "10"])
        corpus_path = tmp_path / "corpus.jsonl"
        main(["ingest", "--input", str(dump), "--out", str(corpus_path)])
        segments = tmp_path / "segments.jsonl"
        assert main(["select", "--corpus", str(corpus_path), "--out", str(segments)]) == 0
        scored = tmp_path / "scored.jsonl"
        assert main(["score", "--segments", str(segments), "--out", str(scored)]) == 0
        split = tmp_path / "split.json"
        assert main(["split", "--segments", str(scored), "--out", str(split)]) == 0
        data = json.loads(split.read_text())
        assert set(data) == {"seed", "train", "val", "test"}

    def test_gridsearch_limited(self, pipeline_dir, tmp_path):
        out = tmp_path / "grid.json"
        assert main([
            "gridsearch",
            "--segments", str(pipeline_dir / "segments_scored.jsonl"),
            "--split", str(pipeline_dir / "split.json"),
            "--cache", str(pipeline_dir / "embeddings.cache"),
            "--out", str(out), "--epochs", "1", "--limit", "2",
        ]) == 0
        rows = json.loads(out.read_text())
        assert len(rows) == 2
        assert rows[0]["rank"] == 1

    def test_config_file_supplies_defaults(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"threads": 7}))
        dump = tmp_path / "dump.jsonl"
        assert main(["--config", str(cfg), "synth", "--out", str(dump)]) == 0
        posts = sum("title" in json.loads(l) for l in dump.read_text().splitlines())
        assert posts == 7
