import pytest

from src.core.audio.waveform import Waveform
from src.core.exceptions import MissingPesqError, ShapeError
from src.metrics.composite import composite_measures, llr, wss
from tests.helpers import white_noise


def test_composite_measures_values():
    csig, cbak, covl = composite_measures(3.0, 0.5, 30.0, 10.0)
    assert csig == pytest.approx(4.1175)
    assert cbak == pytest.approx(3.488)
    assert covl == pytest.approx(3.543)


def test_composite_measures_are_clipped():
    assert composite_measures(4.5, 0.0, 0.0, 35.0) == (5.0, 5.0, 5.0)
    assert composite_measures(-0.5, 2.0, 150.0, -10.0) == (1.0, 1.0, 1.0)


def test_composite_measures_need_pesq():
    with pytest.raises(MissingPesqError):
        composite_measures(None, 0.5, 30.0, 10.0)


def test_identical_tracks(speech):
    assert llr(speech, speech) == pytest.approx(0.0, abs=1e-6)
    assert wss(speech, speech) == 0.0


def test_distortion_raises_both_distances(speech):
    noisy = Waveform(speech.samples + white_noise(speech.n, scale=0.1).samples)
    assert 0.0 < llr(speech, noisy) <= 2.0
    assert wss(speech, noisy) > 0.0


def test_lengths_must_match(speech):
    with pytest.raises(ShapeError):
        llr(speech, Waveform.zeros(speech.n - 10))
