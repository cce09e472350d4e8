import math

import numpy as np
import pytest
import torch

from src.core.audio.stft import (
    StftConfig,
    TfRepresentation,
    analysis_window,
    istft,
    istft_tensor,
    magnitude_compress,
    magnitude_decompress,
    plan_stft,
    stft,
)
from src.core.audio.waveform import Waveform
from src.core.exceptions import (
    DataError,
    LengthOutOfRangeError,
    NegativeMagnitudeError,
    PlanMismatchError,
    ShapeError,
)
from tests.helpers import white_noise


def test_plan_one_second_track():
    plan = plan_stft(16000)
    assert plan.hop == 61
    assert plan.n_frames == 256
    assert plan.n_bins == 256
    assert plan.padded_length == 510 + 255 * 61
    assert plan.pad_left == (plan.padded_length - 16000) // 2
    assert plan.pad_left + plan.pad_right + 16000 == plan.padded_length


def test_plan_shortest_hop():
    plan = plan_stft(765, StftConfig(min_length=500))
    assert plan.hop == 1


@pytest.mark.parametrize("n", [8000, 16000, 16001, 40000, 130560])
def test_plan_yields_fixed_frame_count(n):
    plan = plan_stft(n)
    assert (plan.padded_length - plan.window_length) // plan.hop + 1 == 256
    assert plan.padded_length >= n
    assert plan.invertible


def test_plan_rejects_lengths_outside_range():
    with pytest.raises(LengthOutOfRangeError) as info:
        plan_stft(160000)
    assert info.value.n_max == 130560
    with pytest.raises(LengthOutOfRangeError):
        plan_stft(7999)


def test_plan_with_hop_beyond_window_cannot_be_transformed():
    config = StftConfig(max_length=200000)
    plan = plan_stft(160000, config)
    assert plan.hop == 626
    assert not plan.invertible
    with pytest.raises(PlanMismatchError):
        stft(Waveform.zeros(160000), plan)


def test_stft_shape_and_zero_signal():
    tf = stft(Waveform.zeros(16000))
    assert tuple(tf.magnitude.shape) == (256, 256)
    assert torch.all(tf.magnitude == 0)
    assert torch.all(tf.phase == 0)


def test_stft_rejects_plan_of_other_length():
    with pytest.raises(PlanMismatchError):
        stft(Waveform.zeros(16000), plan_stft(17000))


def test_stft_matches_direct_dft_of_one_frame():
    waveform = white_noise(20000, seed=3)
    tf = stft(waveform)
    plan = tf.plan
    padded = np.pad(waveform.numpy(), (plan.pad_left, plan.pad_right))
    window = analysis_window(plan).numpy()
    for frame in (0, 100, 255):
        start = frame * plan.hop
        expected = np.fft.rfft(padded[start : start + plan.window_length] * window, plan.fft_size)
        np.testing.assert_allclose(tf.magnitude[:, frame].numpy(), np.abs(expected), atol=1e-9)


def test_stft_magnitude_scales_and_phase_is_kept():
    waveform = white_noise(16000, seed=4)
    tf = stft(waveform)
    doubled = stft(Waveform(2 * waveform.samples))
    torch.testing.assert_close(doubled.magnitude, 2 * tf.magnitude)
    torch.testing.assert_close(doubled.phase, tf.phase)
    assert float(tf.phase.max()) <= math.pi
    assert float(tf.phase.min()) > -math.pi


def test_bin_centred_sinusoid_peaks_in_its_bin():
    k = 40
    t = np.arange(16000)
    waveform = Waveform.from_numpy(np.sin(2 * np.pi * k * t / 510))
    magnitude = stft(waveform).magnitude.numpy()
    assert np.all(np.argmax(magnitude[:, 20:236], axis=0) == k)


@pytest.mark.parametrize("n", [8000, 16000, 16001, 40000, 130560])
def test_round_trip_reconstructs_the_track(n):
    waveform = white_noise(n, seed=n)
    reconstructed = istft(stft(waveform))
    assert reconstructed.n == n
    error = np.linalg.norm(reconstructed.numpy() - waveform.numpy())
    assert error / np.linalg.norm(waveform.numpy()) < 1e-6


def test_zero_magnitude_inverts_to_silence():
    plan = plan_stft(16000)
    phase = torch.rand(256, 256, dtype=torch.float64) * 2 * math.pi - math.pi
    samples = istft_tensor(torch.zeros(256, 256, dtype=torch.float64), phase, plan)
    assert torch.all(samples == 0)


def test_istft_rejects_wrong_shapes():
    plan = plan_stft(16000)
    with pytest.raises(ShapeError):
        istft_tensor(torch.zeros(255, 256), torch.zeros(255, 256), plan)


def test_compression_round_trip_and_monotone():
    values = torch.tensor([0.0, 0.5, 1.0, 10.0, 300.0], dtype=torch.float64)
    compressed = magnitude_compress(values)
    assert float(compressed[0]) == 0.0
    assert torch.all(compressed[1:] > compressed[:-1])
    torch.testing.assert_close(magnitude_decompress(compressed), values)
    assert float(magnitude_compress(torch.tensor(300.0))) < 1.05


def test_compression_keeps_the_array_kind():
    values = np.array([0.0, 2.0, 4.0])
    compressed = magnitude_compress(values, 5.55)
    assert isinstance(compressed, np.ndarray)
    np.testing.assert_allclose(compressed, np.log1p(values) / 5.55)


def test_compression_rejects_negative_magnitudes():
    with pytest.raises(NegativeMagnitudeError):
        magnitude_compress(torch.tensor([0.5, -0.1]))


def test_representation_checks_its_shape():
    plan = plan_stft(16000)
    with pytest.raises(ShapeError):
        TfRepresentation(torch.zeros(256, 255), torch.zeros(256, 255), plan)
    with pytest.raises(NegativeMagnitudeError):
        TfRepresentation(-torch.ones(256, 256), torch.zeros(256, 256), plan)


def test_compressed_representation_inverts_like_the_linear_one():
    waveform = white_noise(24000, seed=5)
    tf = stft(waveform)
    compressed = tf.compress(5.55)
    assert compressed.compressed
    reconstructed = istft(compressed.decompress(5.55))
    np.testing.assert_allclose(reconstructed.numpy(), waveform.numpy(), atol=1e-9)


def test_binary_record_keeps_the_plan():
    tf = stft(white_noise(16000, seed=6)).compress(5.55)
    payload = tf.to_bytes()
    decoded = TfRepresentation.from_bytes(payload)
    assert decoded.plan == tf.plan
    assert decoded.compressed
    torch.testing.assert_close(decoded.magnitude, tf.magnitude, atol=1e-6, rtol=1e-5)
    with pytest.raises(DataError):
        TfRepresentation.from_bytes(payload[:-4])
    with pytest.raises(DataError):
        TfRepresentation.from_bytes(b"XXXX" + payload[4:])


@pytest.mark.parametrize("n", np.linspace(8000, 130560, 20).astype(int).tolist())
def test_round_trip_across_the_length_range(n):
    waveform = white_noise(n, seed=n % 97)
    reconstructed = istft(stft(waveform))
    error = np.linalg.norm(reconstructed.numpy() - waveform.numpy())
    assert error / np.linalg.norm(waveform.numpy()) < 1e-6


def test_every_length_yields_the_fixed_grid():
    rng = np.random.default_rng(0)
    for n in rng.integers(8000, 130561, 500):
        plan = plan_stft(int(n))
        assert (plan.n_bins, plan.n_frames) == (256, 256)
        assert (plan.padded_length - plan.window_length) // plan.hop + 1 == 256
        assert plan.pad_left + plan.pad_right + n == plan.padded_length
        assert plan.invertible
