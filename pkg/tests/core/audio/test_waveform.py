import numpy as np
import pytest
import soundfile as sf
import torch

from src.core.audio.waveform import (
    Waveform,
    from_wav_bytes,
    read_wav,
    to_wav_bytes,
    waveform_digest,
    write_wav,
)
from src.core.exceptions import DataError
from tests.helpers import white_noise


def test_waveform_contract():
    with pytest.raises(DataError):
        Waveform(torch.zeros(2, 100))
    with pytest.raises(DataError):
        Waveform(torch.zeros(100), sample_rate=8000)
    with pytest.raises(DataError):
        Waveform(torch.tensor([0.0, float("nan")]))
    assert Waveform.zeros(10).is_silent()
    assert Waveform([0.0, 0.5]).n == 2


def test_wav_file_keeps_samples_to_pcm_precision(tmp_path):
    waveform = white_noise(16000, seed=1)
    path = str(tmp_path / "track.wav")
    write_wav(path, waveform)
    loaded = read_wav(path)
    assert loaded.n == waveform.n
    np.testing.assert_allclose(loaded.numpy(), waveform.numpy(), atol=2.0 / 32768)


def test_wav_writer_clips(tmp_path):
    path = str(tmp_path / "loud.wav")
    write_wav(path, Waveform.from_numpy(np.array([2.0, -3.0, 0.25])))
    np.testing.assert_allclose(read_wav(path).numpy(), [32767 / 32768, -1.0, 0.25], atol=1e-4)


def test_reader_rejects_stereo_and_other_rates(tmp_path):
    stereo = str(tmp_path / "stereo.wav")
    sf.write(stereo, np.zeros((100, 2)), 16000)
    with pytest.raises(DataError):
        read_wav(stereo)
    narrow = str(tmp_path / "narrow.wav")
    sf.write(narrow, np.zeros(100), 8000)
    with pytest.raises(DataError):
        read_wav(narrow)
    with pytest.raises(DataError):
        read_wav(str(tmp_path / "missing.wav"))


def test_wav_bytes_and_digest():
    waveform = white_noise(4000, seed=2)
    payload = to_wav_bytes(waveform)
    decoded = from_wav_bytes(payload)
    assert waveform_digest(decoded) == waveform_digest(waveform)
    assert waveform_digest(white_noise(4000, seed=3)) != waveform_digest(waveform)
    with pytest.raises(DataError):
        from_wav_bytes(b"not a wav file")
