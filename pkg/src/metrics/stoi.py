"""
Short-time objective intelligibility. Resample to 10 kHz, drop frames more than 40 dB below the
loudest clean frame, decompose into one-third-octave bands and correlate clipped, normalized
short-time band envelopes over 384 ms segments.
"""

from dataclasses import dataclass, fields
from functools import lru_cache
from math import gcd

import numpy as np
from scipy.signal import resample_poly
from scipy.signal.windows import hann

from src.core.audio.waveform import Waveform
from src.core.config.manager import ConfigManager
from src.core.constants import SAMPLE_RATE, ConfigNames
from src.core.exceptions import ShapeError, SilentSignalError, TooShortError

EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class StoiSettings:
    internal_rate: int = 10000
    frame_length: int = 256
    fft_size: int = 512
    num_bands: int = 15
    min_frequency: float = 150.0
    segment_frames: int = 30
    beta_db: float = -15.0
    dynamic_range_db: float = 40.0

    @classmethod
    def from_config(cls) -> "StoiSettings":
        config = ConfigManager().load_config(ConfigNames.STOI) or {}
        known = {field.name for field in fields(cls)}
        return cls(**{k: v for k, v in config.items() if k in known})


@lru_cache(maxsize=4)
def third_octave_matrix(rate: int, fft_size: int, num_bands: int, min_frequency: float):
    """Band-assignment matrix [num_bands, fft_size // 2 + 1] with edges snapped to FFT bins."""
    frequencies = np.linspace(0, rate, fft_size + 1)[: fft_size // 2 + 1]
    k = np.arange(num_bands, dtype=np.float64)
    low = min_frequency * np.power(2.0, (2 * k - 1) / 6)
    high = min_frequency * np.power(2.0, (2 * k + 1) / 6)
    matrix = np.zeros((num_bands, frequencies.size))
    for band in range(num_bands):
        low_bin = int(np.argmin(np.square(frequencies - low[band])))
        high_bin = int(np.argmin(np.square(frequencies - high[band])))
        matrix[band, low_bin:high_bin] = 1
    return matrix


def _frames(x: np.ndarray, length: int, hop: int) -> np.ndarray:
    window = hann(length + 2)[1:-1]
    starts = range(0, x.size - length, hop)
    return np.array([window * x[start : start + length] for start in starts]).reshape(-1, length)


def _overlap_add(frames: np.ndarray, hop: int) -> np.ndarray:
    count, length = frames.shape
    signal = np.zeros((count - 1) * hop + length) if count else np.zeros(0)
    for index in range(count):
        signal[index * hop : index * hop + length] += frames[index]
    return signal


def remove_silent_frames(x: np.ndarray, y: np.ndarray, settings: StoiSettings):
    hop = settings.frame_length // 2
    x_frames = _frames(x, settings.frame_length, hop)
    y_frames = _frames(y, settings.frame_length, hop)
    energies = 20 * np.log10(np.linalg.norm(x_frames, axis=1) + EPS)
    keep = (np.max(energies) - settings.dynamic_range_db - energies) < 0
    return _overlap_add(x_frames[keep], hop), _overlap_add(y_frames[keep], hop)


def _spectrogram(x: np.ndarray, settings: StoiSettings) -> np.ndarray:
    """[frames, bins] magnitude-squared STFT at 50% overlap."""
    frames = _frames(x, settings.frame_length, settings.frame_length // 2)
    return np.square(np.abs(np.fft.rfft(frames, n=settings.fft_size, axis=1)))


@lru_cache(maxsize=4)
def resampling_filter(up: int, down: int, rejection_db: float = 60.0) -> np.ndarray:
    """Kaiser-windowed sinc low-pass for ``resample_poly``, cut off at the lower Nyquist rate."""
    cutoff = 1.0 / (2 * max(up, down))
    half_length = int(np.ceil((rejection_db - 8) / (28.714 * cutoff / 10)))
    t = np.arange(-half_length, half_length + 1)
    taps = np.kaiser(2 * half_length + 1, 0.1102 * (rejection_db - 8.7)) * np.sinc(2 * cutoff * t)
    return taps / np.sum(taps)


def _resample(x: np.ndarray, source_rate: int, target_rate: int) -> np.ndarray:
    if source_rate == target_rate:
        return x
    divisor = gcd(source_rate, target_rate)
    up, down = target_rate // divisor, source_rate // divisor
    return resample_poly(x, up, down, window=resampling_filter(up, down))


def stoi(clean: Waveform, estimate: Waveform, settings: StoiSettings = None) -> float:
    """
    Intelligibility of ``estimate`` against ``clean`` in [0, 1].

    :raise: ShapeError: If the lengths differ
    :raise: SilentSignalError: If the clean track is silent
    :raise: TooShortError: If fewer than one 384 ms segment of speech frames remains
    """
    settings = settings or StoiSettings.from_config()
    if clean.n != estimate.n:
        raise ShapeError(f"Clean ({clean.n}) and estimate ({estimate.n}) lengths differ")
    if clean.is_silent():
        raise SilentSignalError("STOI of a silent clean track is undefined")

    x = _resample(clean.numpy(), SAMPLE_RATE, settings.internal_rate)
    y = _resample(estimate.numpy(), SAMPLE_RATE, settings.internal_rate)
    minimum = settings.frame_length * (settings.segment_frames + 1) // 2
    if x.size < minimum:
        raise TooShortError(
            f"STOI needs at least {minimum / settings.internal_rate:.3f} s of audio"
        )
    x, y = remove_silent_frames(x, y, settings)

    bands = third_octave_matrix(
        settings.internal_rate, settings.fft_size, settings.num_bands, settings.min_frequency
    )
    x_bands = np.sqrt(bands @ _spectrogram(x, settings).T)
    y_bands = np.sqrt(bands @ _spectrogram(y, settings).T)
    n = settings.segment_frames
    if x_bands.shape[1] < n:
        raise TooShortError(
            f"Only {x_bands.shape[1]} speech frames remain, a segment needs {n}"
        )

    x_segments = np.array([x_bands[:, m - n : m] for m in range(n, x_bands.shape[1] + 1)])
    y_segments = np.array([y_bands[:, m - n : m] for m in range(n, y_bands.shape[1] + 1)])
    scale = np.linalg.norm(x_segments, axis=2, keepdims=True) / (
        np.linalg.norm(y_segments, axis=2, keepdims=True) + EPS
    )
    clip = 10 ** (-settings.beta_db / 20)
    y_primes = np.minimum(y_segments * scale, x_segments * (1 + clip))
    y_primes = y_primes - np.mean(y_primes, axis=2, keepdims=True)
    x_segments = x_segments - np.mean(x_segments, axis=2, keepdims=True)
    y_primes /= np.linalg.norm(y_primes, axis=2, keepdims=True) + EPS
    x_segments /= np.linalg.norm(x_segments, axis=2, keepdims=True) + EPS
    score = np.sum(y_primes * x_segments) / (x_segments.shape[0] * x_segments.shape[1])
    return float(np.clip(score, 0.0, 1.0))
