"""CLI tests on a miniature run: artifacts, determinism, exit codes."""

import json
from pathlib import Path

import pytest

from lakemerge.cli import main
from lakemerge.discover import load_partition

_SMALL = [
    "--set", "bench.entities=15",
    "--set", "train.epochs=2",
    "--set", "resolve.k=4",
]


def _args(command: str, out_dir: Path, *extra: str) -> list[str]:
    return [command, "--set", f"run.out_dir={out_dir}", *_SMALL, *extra]


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("pipeline")
    assert main(_args("pipeline", out)) == 0
    return out


def test_pipeline_writes_all_artifacts(pipeline_dir):
    for name in (
        "bench/manifest.json",
        "bench/dirty.csv",
        "matcher.json",
        "train_log.jsonl",
        "judgments.json",
        "partition.json",
        "resolved.json",
        "report.json",
    ):
        assert (pipeline_dir / name).is_file(), name


def test_report_shape(pipeline_dir):
    report = json.loads((pipeline_dir / "report.json").read_text())
    assert set(report) >= {"f1", "similarity", "accuracy", "config", "baseline"}
    assert 0.0 <= report["f1"]["f1"] <= 1.0
    assert 0.0 <= report["similarity"]["normalized"] <= 1.0
    assert report["accuracy"] is None or 0.0 <= report["accuracy"] <= 1.0
    assert report["config"]["bench"]["entities"] == 15
    assert "out_dir" not in report["config"]["run"]


def test_stage_reruns_are_byte_identical(pipeline_dir):
    before = {
        name: (pipeline_dir / name).read_bytes()
        for name in ("judgments.json", "partition.json", "report.json")
    }
    assert main(_args("judge", pipeline_dir)) == 0
    assert main(_args("discover", pipeline_dir)) == 0
    assert main(_args("resolve", pipeline_dir)) == 0
    assert main(_args("evaluate", pipeline_dir)) == 0
    for name, body in before.items():
        assert (pipeline_dir / name).read_bytes() == body, name


def test_pipeline_equals_manual_stages(pipeline_dir, tmp_path):
    manual = tmp_path / "manual"
    for cmd in ("gen-bench", "train", "judge", "discover", "resolve", "evaluate"):
        assert main(_args(cmd, manual)) == 0
    for name in (
        "bench/dirty.csv",
        "bench/ground_truth.json",
        "matcher.json",
        "judgments.json",
        "partition.json",
        "resolved.json",
        "report.json",
    ):
        assert (manual / name).read_bytes() == (pipeline_dir / name).read_bytes(), name


def test_discover_method_flag(pipeline_dir, tmp_path):
    # Same judgments, two methods: both valid partitions over one universe.
    alt = tmp_path / "alt"
    for cmd in ("gen-bench", "train", "judge"):
        assert main(_args(cmd, alt)) == 0
    assert main(_args("discover", alt, "--method", "bk")) == 0
    bk_part, bk_method = load_partition(alt / "partition.json")
    assert main(_args("discover", alt, "--method", "louvain")) == 0
    lv_part, lv_method = load_partition(alt / "partition.json")
    assert (bk_method, lv_method) == ("bk", "louvain")
    assert bk_part.n == lv_part.n


def test_unknown_config_key_exits_1(tmp_path, capsys):
    code = main(["gen-bench", "--set", f"run.out_dir={tmp_path}", "--set", "bench.entites=3"])
    assert code == 1
    assert "bench.entites" in capsys.readouterr().err


def test_bad_config_file_exits_1(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[bench]\nnoise_mix = vibes\n")
    code = main(["gen-bench", "-c", str(cfg), "--set", f"run.out_dir={tmp_path}"])
    assert code == 1
    assert "noise_mix" in capsys.readouterr().err


def test_missing_stage_input_exits_1(tmp_path, capsys):
    code = main(_args("judge", tmp_path / "empty"))
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


def test_http_providers_require_urls(tmp_path, capsys):
    assert main(_args("train", tmp_path, "--set", "embed.provider=http")) == 1
    assert "embed.url" in capsys.readouterr().err
    code = main(_args("resolve", tmp_path, "--set", "resolve.client=http"))
    assert code == 1
    assert "resolve.llm_url" in capsys.readouterr().err


def test_config_file_drives_pipeline(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    out = tmp_path / "out"
    cfg.write_text(
        f"[run]\nseed = 3\nout_dir = {out}\n"
        "[bench]\nentities = 12\n"
        "[train]\nepochs = 1\n"
        "[discover]\nmethod = labelprop\n"
        "[resolve]\nresolver = majority\n"
    )
    assert main(["pipeline", "-c", str(cfg)]) == 0
    _, method = load_partition(out / "partition.json")
    assert method == "labelprop"
    text = capsys.readouterr().out
    assert "f1" in text and "similarity" in text and "accuracy" in text
