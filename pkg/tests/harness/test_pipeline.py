import json
import os

import pytest

from src.core.exceptions import ConfigError, DataError
from src.harness.config import RunConfig
from src.harness.pipeline import (
    NOISY_MODEL,
    enhance_run,
    evaluate_noisy,
    evaluate_run,
    load_run_config,
)
from src.harness.records import ENHANCED_DIR, ENHANCED_INDEX, RunRecord
from src.harness.reporting import report
from src.harness.trainer import train
from src.metrics.asr.client import LocalAsrClient


@pytest.fixture
def wiener_run(manifest_path, tmp_path) -> str:
    run_dir = str(tmp_path / "wiener")
    cfg = RunConfig.parse({"framework": "wiener", "manifest": manifest_path, "snr_list": [5.0]})
    train(cfg, run_dir)
    return run_dir


def test_enhance_writes_the_test_split(wiener_run):
    index = enhance_run(wiener_run)
    assert len(index) == 4
    assert all(line["snr_db"] == 5.0 for line in index)
    directory = os.path.join(wiener_run, ENHANCED_DIR)
    with open(os.path.join(directory, ENHANCED_INDEX), "r", encoding="utf-8") as file:
        assert [json.loads(line) for line in file] == index
    assert all(os.path.exists(os.path.join(directory, line["path"])) for line in index)


def test_evaluate_and_report(wiener_run, manifest_path, tmp_path):
    enhance_run(wiener_run)
    record = evaluate_run(wiener_run, asr_client=LocalAsrClient())
    assert record.snr_values == [5.0]
    assert len(record.reports["5"]) == 4
    assert RunRecord.load(wiener_run).aggregates["5"] == record.aggregates["5"]

    noisy_dir = str(tmp_path / NOISY_MODEL)
    noisy = evaluate_noisy(manifest_path, noisy_dir, [5.0], LocalAsrClient())
    assert noisy.name == NOISY_MODEL
    assert len(noisy.reports["5"]) == 4

    files = report([noisy_dir, wiener_run], str(tmp_path / "report"))
    with open(files.table_md, "r", encoding="utf-8") as file:
        markdown = file.read()
    assert "| noisy | 5 | - |" in markdown
    assert "| wiener | 5 | - |" in markdown


def test_pipeline_errors(wiener_run, tmp_path):
    with pytest.raises(DataError):
        evaluate_run(wiener_run, asr_client=LocalAsrClient())
    with pytest.raises(DataError):
        load_run_config(str(tmp_path / "nowhere"))

    unnamed = str(tmp_path / "unnamed")
    train(RunConfig.parse({"framework": "wiener"}), unnamed)
    with pytest.raises(ConfigError):
        enhance_run(unnamed)

    segan = str(tmp_path / "segan")
    os.makedirs(segan)
    with open(os.path.join(segan, "config.json"), "w", encoding="utf-8") as file:
        json.dump(RunConfig.parse({"framework": "segan"}).snapshot(), file)
    with pytest.raises(DataError):
        enhance_run(segan, manifest_path=os.path.join(wiener_run, "missing.jsonl"))
