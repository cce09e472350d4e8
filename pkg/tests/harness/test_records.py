import json
import os

import pytest

from src.core.exceptions import DataError
from src.harness.records import RECORD_FILE, RunRecord, checkpoint_path, snr_key
from src.metrics.report import MetricsReport


def _reports(offset: float = 0.0):
    return [
        MetricsReport(track_id="a", ssnr_db=5.0 + offset, stoi=0.7, one_minus_wer=1.0),
        MetricsReport(track_id="b", ssnr_db=9.0 + offset, stoi=0.9, one_minus_wer=0.5),
    ]


def test_record_round_trip(tmp_path):
    record = RunRecord(name="cd_wavenet", framework="cd_wavenet", seed=3)
    record.set_reports(5.0, _reports())
    record.set_reports(0, _reports(-4.0))
    record.checkpoints = ["checkpoints/epoch_001.pt", "checkpoints/epoch_002.pt"]
    record.save(str(tmp_path))

    loaded = RunRecord.load(str(tmp_path))
    assert loaded.snr_values == [0.0, 5.0]
    assert loaded.aggregates["5"].ssnr_db == pytest.approx(7.0)
    assert [r.track_id for r in loaded.reports["0"]] == ["a", "b"]
    assert loaded.latest_checkpoint == "checkpoints/epoch_002.pt"


def test_tampered_aggregates_are_detected(tmp_path):
    record = RunRecord(name="segan", framework="segan")
    record.set_reports(5.0, _reports())
    record.save(str(tmp_path))
    path = os.path.join(str(tmp_path), RECORD_FILE)
    with open(path, "r", encoding="utf-8") as file:
        data = json.load(file)
    data["aggregates"]["5"]["ssnr_db"] = 8.0
    with open(path, "w", encoding="utf-8") as file:
        json.dump(data, file)
    with pytest.raises(DataError):
        RunRecord.load(str(tmp_path))


def test_missing_or_broken_records(tmp_path):
    with pytest.raises(DataError):
        RunRecord.load(str(tmp_path))
    (tmp_path / RECORD_FILE).write_text("{")
    with pytest.raises(DataError):
        RunRecord.load(str(tmp_path))


def test_helpers(tmp_path):
    assert snr_key(5) == "5"
    assert snr_key(-2.5) == "-2.5"
    assert checkpoint_path("run", 7) == os.path.join("run", "checkpoints", "epoch_007.pt")
    assert RunRecord(name="x", framework="wiener").latest_checkpoint is None
