import pytest
from pydantic import ValidationError

from src.core.audio.waveform import Waveform
from src.core.exceptions import DataError
from src.metrics.pesq import PesqScorer
from src.metrics.report import MetricsReport, aggregate, measure


class ConstantPesq(PesqScorer):
    def __init__(self, value: float):
        self.value = value

    def score(self, clean: Waveform, estimate: Waveform) -> float:
        return self.value


def test_report_ranges_are_checked():
    MetricsReport(ssnr_db=35.0, stoi=1.0, one_minus_wer=-0.5)
    with pytest.raises(ValidationError):
        MetricsReport(ssnr_db=36.0, stoi=0.5, one_minus_wer=1.0)
    with pytest.raises(ValidationError):
        MetricsReport(ssnr_db=0.0, stoi=1.2, one_minus_wer=1.0)
    with pytest.raises(ValidationError):
        MetricsReport(ssnr_db=0.0, stoi=0.5, one_minus_wer=1.5)


def test_table_row_uses_percentages():
    row = MetricsReport(ssnr_db=7.5, stoi=0.81, one_minus_wer=0.75).as_row()
    assert list(row) == ["PESQ", "CSIG", "CBAK", "COVL", "SSNR", "STOI", "1-WER"]
    assert row["PESQ"] is None
    assert row["SSNR"] == 7.5
    assert row["STOI"] == pytest.approx(81.0)
    assert row["1-WER"] == pytest.approx(75.0)


def test_aggregate_means():
    reports = [
        MetricsReport(track_id="a", pesq=2.0, ssnr_db=5.0, stoi=0.6, one_minus_wer=1.0),
        MetricsReport(track_id="b", pesq=3.0, ssnr_db=10.0, stoi=0.8, one_minus_wer=0.5),
    ]
    mean = aggregate(reports)
    assert mean.track_id == "mean"
    assert mean.pesq == pytest.approx(2.5)
    assert mean.ssnr_db == pytest.approx(7.5)
    assert mean.stoi == pytest.approx(0.7)
    assert mean.one_minus_wer == pytest.approx(0.75)
    assert mean.csig is None

    reports.append(MetricsReport(track_id="c", ssnr_db=0.0, stoi=0.1, one_minus_wer=0.0))
    assert aggregate(reports).pesq is None
    with pytest.raises(DataError):
        aggregate([])


def test_measure_a_perfect_estimate(speech, sentence):
    report = measure(speech, speech, sentence.transcript, sentence.transcript, "perfect")
    assert report.track_id == "perfect"
    assert report.ssnr_db == pytest.approx(35.0)
    assert report.stoi >= 0.999
    assert report.one_minus_wer == 1.0
    assert report.pesq is None and report.covl is None


def test_measure_with_a_pesq_plugin(speech, sentence):
    report = measure(
        speech, speech, sentence.transcript, "yes down", pesq_scorer=ConstantPesq(4.5)
    )
    assert report.pesq == 4.5
    assert (report.csig, report.cbak, report.covl) == (5.0, 5.0, 5.0)
    assert report.one_minus_wer == pytest.approx(0.5)


@pytest.mark.parametrize("reference", [None, "", " ... "])
def test_measure_without_a_reference_skips_wer(speech, reference):
    report = measure(speech, speech, reference, None, "untranscribed")
    assert report.one_minus_wer is None
    assert report.stoi >= 0.999
    assert report.as_row()["1-WER"] is None
