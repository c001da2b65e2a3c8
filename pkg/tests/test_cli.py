import json

import pandas as pd
import pytest

from attriqa.cli import main
from attriqa.diffcore.checkpoint import read_tensors
from attriqa.datagen.manifest import ground_truth_matrix, read_manifest
from attriqa.pipeline.config import load_run_config
from attriqa.util.logging import run_log, setup_logging
from attriqa.util.tables import read_matrix, write_matrix
from helpers import REPO_ROOT

SMOKE = str(REPO_ROOT / "configs" / "smoke.toml")


@pytest.fixture
def smoke_run(tmp_path):
    out = tmp_path / "run"
    main(["run", "--config", SMOKE, "--out", str(out), "--workers", "1"])
    return out


def test_run_writes_every_stage(smoke_run):
    for rel in [
        "generate/manifest.jsonl",
        "generate/schedules.md",
        "registry/registry.json",
        "train_dist/distortion_model.atq",
        "extract/attr_probs.csv",
        "extract/dist_probs.csv",
        "train_reg/regressor.atq",
        "eval/report.json",
        "eval/report.md",
        "saliency/saliency.jsonl",
    ]:
        assert (smoke_run / rel).exists(), rel
    for stage in ["generate", "registry", "train_dist", "extract", "train_reg", "eval", "saliency"]:
        resolved = json.loads((smoke_run / stage / "resolved_config.json").read_text())
        assert resolved["config"]["seed"] == 1

    report = json.loads((smoke_run / "eval" / "report.json").read_text())
    assert 0.0 <= report["accuracy"] <= 1.0
    assert report["counts"]["records"] == 12
    assert report["plcc"] is not None

    maps = [json.loads(line) for line in (smoke_run / "saliency" / "saliency.jsonl").read_text().splitlines()]
    assert maps and all(m["max"] in (0.0, 1.0) for m in maps)
    assert all((m["height"], m["width"]) == (32, 32) for m in maps)


def test_eval_of_exact_predictions(smoke_run, tmp_path):
    manifest = read_manifest(smoke_run / "generate" / "manifest.jsonl")
    truth = ground_truth_matrix(manifest.records, manifest.distortions)
    df = pd.DataFrame(truth, columns=manifest.distortions)
    df.insert(0, "record_id", [r.record_id for r in manifest.records])
    df.to_csv(tmp_path / "exact.csv", index=False)

    main(["eval", "--config", SMOKE, "--out", str(smoke_run), "--dist-predictions", str(tmp_path / "exact.csv")])
    report = json.loads((smoke_run / "eval" / "report.json").read_text())
    assert report["accuracy"] == 1.0
    assert report["rmse"] == 0.0


def test_missing_config_exits_with_config_code(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--config", str(tmp_path / "nope.toml")])
    assert exc.value.code == 2


def test_eval_without_a_manifest_exits_with_data_code(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--config", SMOKE, "--out", str(tmp_path / "empty")])
    assert exc.value.code == 3


def test_relative_out_resolves_against_data_root(tmp_path):
    config = load_run_config(SMOKE)
    assert config.out == tmp_path / "runs" / "smoke"
    assert load_run_config(SMOKE, {"train_dist.mode": "full", "seed": 4}).seed == 4


def test_schedules_and_runs_commands(tmp_path, capsys):
    main(["schedules", "--out", str(tmp_path)])
    text = (tmp_path / "schedules.md").read_text()
    assert "gaussian_blur" in text
    capsys.readouterr()
    main(["schedules", "--levels", "3"])
    assert "k=3" in capsys.readouterr().out
    main(["runs"])
    assert "No runs recorded" in capsys.readouterr().out
    with pytest.raises(SystemExit):
        main(["eval", "--config", SMOKE, "--out", str(tmp_path / "empty")])
    capsys.readouterr()
    main(["runs", "--limit", "5"])
    out = capsys.readouterr().out
    assert "eval" in out and "failed" in out


def _exit_code(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    return exc.value.code


def test_artifacts_name_the_command_that_wrote_them(smoke_run):
    assert read_manifest(smoke_run / "generate" / "manifest.jsonl").header.creator == "attriqa generate"
    header, _ = read_tensors(smoke_run / "train_dist" / "distortion_model.atq")
    assert header.creator == "attriqa train-dist"
    header, _ = read_matrix(smoke_run / "extract" / "attr_probs.csv")
    assert header.creator == "attriqa extract"
    header, _ = read_tensors(smoke_run / "train_reg" / "regressor.atq")
    assert header.creator == "attriqa train-reg"


def test_run_log_is_written(smoke_run):
    text = (smoke_run / "run.log").read_text()
    assert "[INFO] attriqa." in text


@pytest.mark.parametrize("tamper", ["extra_column", "reordered"])
def test_regressor_only_reads_registry_columns(smoke_run, tamper):
    path = smoke_run / "extract" / "attr_probs.csv"
    header, df = read_matrix(path)
    if tamper == "extra_column":
        df = df.assign(embedding_0=0.1)
    else:
        df = df[["record_id", *reversed(df.columns[1:])]]
    write_matrix(df, path, header)
    assert _exit_code(["train-reg", "--config", SMOKE, "--out", str(smoke_run)]) == 3


def test_prompt_tuning_needs_a_prompt_length(smoke_run):
    base = ["train-dist", "--config", SMOKE, "--out", str(smoke_run)]
    assert _exit_code([*base, "--mode", "shallow"]) == 2
    main([*base, "--mode", "shallow", "--prompt-len", "2"])
    header, _ = read_tensors(smoke_run / "train_dist" / "distortion_model.atq")
    assert header.meta["config"]["vit"]["prompt_len"] == 2


def test_repeated_distortion_is_a_config_error(tmp_path):
    argv = ["generate", "--config", SMOKE, "--out", str(tmp_path / "run")]
    assert _exit_code([*argv, "--distortions", "gaussian_blur", "gaussian_blur"]) == 2


def test_logging_setup_is_idempotent(tmp_path):
    logger = setup_logging("DEBUG")
    setup_logging()
    assert sum(getattr(h, "attriqa_console", False) for h in logger.handlers) == 1
    before = list(logger.handlers)
    with run_log(tmp_path / "out") as path:
        logger.getChild("test").info("inside the run")
    logger.getChild("test").info("after the run")
    assert logger.handlers == before
    text = path.read_text()
    assert "inside the run" in text and "after the run" not in text


def test_predictions_must_name_manifest_distortions(smoke_run, tmp_path):
    manifest = read_manifest(smoke_run / "generate" / "manifest.jsonl")
    df = pd.DataFrame({"record_id": [r.record_id for r in manifest.records], "embedding_0": 0.5})
    df.to_csv(tmp_path / "bad.csv", index=False)
    argv = ["eval", "--config", SMOKE, "--out", str(smoke_run), "--dist-predictions", str(tmp_path / "bad.csv")]
    assert _exit_code(argv) == 3
