import json

import pytest

from corpus import make_corpus
from wildcut.cli import main
from wildcut.config import default_config_text


def write_config(tmp_path, corpus, out):
    text = default_config_text().replace('roots = ["corpus"]', f'roots = ["{corpus}"]')
    text = text.replace('out_dir = "out"', f'out_dir = "{out}"')
    path = tmp_path / "config.toml"
    path.write_text(text)
    return path


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    corpus = make_corpus(base / "corpus", n_sources=5, seed=31)
    out = base / "out"
    config = write_config(base, corpus, out)
    code = main(["run", "--config", str(config)])
    assert code == 0
    return base, corpus, out, config


def test_run_emits_table(finished_run, capsys):
    base, corpus, out, config = finished_run
    main(["stats", "--out-dir", str(out)])
    captured = capsys.readouterr()
    assert "Raw" in captured.out
    assert "Processed w/o Filtering" in captured.out
    assert "Processed" in captured.out


def test_stats_json_matches_report_bytes(finished_run, capsys):
    _, _, out, _ = finished_run
    code = main(["stats", "--out-dir", str(out), "--json"])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out == (out / "report.json").read_text()


def test_stats_without_report_is_fatal(tmp_path, capsys):
    code = main(["stats", "--out-dir", str(tmp_path)])
    captured = capsys.readouterr()
    assert code == 1
    assert "run" in captured.err


def test_validate_clean_config(finished_run, capsys):
    _, _, _, config = finished_run
    code = main(["validate", "--config", str(config)])
    captured = capsys.readouterr()
    assert code == 0
    payload = json.loads(captured.out)
    assert payload["ok"] is True
    assert payload["diagnostics"] == []


def test_validate_reports_bad_field(finished_run, capsys):
    _, _, _, config = finished_run
    code = main(["validate", "--config", str(config), "--set", "filter.min_lang_confidence=1.5"])
    captured = capsys.readouterr()
    assert code == 1
    payload = json.loads(captured.out)
    assert payload["ok"] is False
    assert any("filter" == d["field"] for d in payload["diagnostics"])


def test_resume_subcommand_after_completion(finished_run, capsys):
    _, _, out, config = finished_run
    manifest = (out / "manifest.jsonl").read_bytes()
    code = main(["resume", "--config", str(config)])
    capsys.readouterr()
    assert code == 0
    assert (out / "manifest.jsonl").read_bytes() == manifest


def test_run_with_overrides_and_json(tmp_path, capsys):
    corpus = make_corpus(tmp_path / "c", n_sources=3, seed=32)
    out = tmp_path / "out"
    config = write_config(tmp_path, corpus, out)
    code = main(["run", "--config", str(config), "--json", "--set", "run.parallel_sources=1"])
    captured = capsys.readouterr()
    assert code == 0
    report = json.loads(captured.out)
    assert report["phases"]["raw"]["retention_pct"] == pytest.approx(100.0)


def test_missing_config_file_is_fatal(capsys):
    code = main(["run", "--config", "/no/such/config.toml"])
    captured = capsys.readouterr()
    assert code == 1
    assert "fatal" in captured.err


def test_bench_small(tmp_path, capsys):
    out = tmp_path / "bench"
    code = main([
        "bench", "--hours", "0.02", "--out-dir", str(out), "--parallel", "2", "--json",
    ])
    captured = capsys.readouterr()
    assert code == 0
    result = json.loads(captured.out)
    assert result["raw_total_h"] == pytest.approx(0.02, rel=0.35)
    assert result["h_per_min"] > 0
    assert set(result["per_stage_s"]) >= {"standardize", "segment", "transcribe", "filter"}


def test_bench_is_deterministic_across_runs(tmp_path, capsys):
    manifests = []
    for name in ("one", "two"):
        out = tmp_path / name
        code = main(["bench", "--hours", "0.01", "--out-dir", str(out), "--json"])
        capsys.readouterr()
        assert code == 0
        manifests.append((out / "manifest.jsonl").read_bytes())
    assert manifests[0] == manifests[1]
    assert len(manifests[0]) > 0
