import numpy as np
from scipy.signal import istft, stft

from src.core.audio.waveform import Waveform
from src.core.config.manager import ConfigManager
from src.core.constants import SAMPLE_RATE, ConfigNames
from src.core.exceptions import TooShortError
from src.core.utils.logging import ServiceLogger

logger = ServiceLogger(__name__)


class WienerFilter:
    """
    Wiener filtering with decision-directed a-priori SNR estimation.

    The noise PSD starts as the mean periodogram of the leading noise-only segment and is
    updated in frames a likelihood-ratio VAD labels as noise. Hamming frames, 50% overlap.
    """

    _CONFIG_SCHEMA = ConfigNames.WIENER

    def __init__(self):
        self.config_client = ConfigManager()
        self.frame_seconds = 0.02
        self.noise_init_seconds = 0.12
        self.a_priori_smoothing = 0.98
        self.noise_update_smoothing = 0.98
        self.vad_threshold = 0.15
        self.gain_floor = 0.1
        self.noise_floor = 1e-12
        self.reload_config()

    def reload_config(self):
        logger.debug("Reloading config")
        config = self.config_client.load_config(self._CONFIG_SCHEMA) or {}
        for key in config.keys():
            self.__setattr__(key, config[key])

    @property
    def frame_length(self) -> int:
        return int(round(self.frame_seconds * SAMPLE_RATE))

    @property
    def hop(self) -> int:
        return self.frame_length // 2

    @property
    def min_length(self) -> int:
        return int(round(self.noise_init_seconds * SAMPLE_RATE)) + self.frame_length

    def _analysis(self, samples: np.ndarray, **kwargs) -> np.ndarray:
        _, _, spectrum = stft(
            samples,
            fs=SAMPLE_RATE,
            window="hamming",
            nperseg=self.frame_length,
            noverlap=self.frame_length - self.hop,
            **kwargs,
        )
        return spectrum

    def initial_noise_psd(self, samples: np.ndarray) -> np.ndarray:
        leading = samples[: int(round(self.noise_init_seconds * SAMPLE_RATE))]
        spectrum = self._analysis(leading, boundary=None, padded=False)
        return np.maximum(np.mean(np.abs(spectrum) ** 2, axis=1), self.noise_floor)

    def gains(self, power: np.ndarray, noise_psd: np.ndarray) -> np.ndarray:
        """Spectral gains [bins, frames] for the noisy power spectrogram ``power``."""
        gains = np.empty_like(power)
        noise_psd = noise_psd.copy()
        a_dd, mu = self.a_priori_smoothing, self.noise_update_smoothing
        previous = None
        for frame in range(power.shape[1]):
            posteriori = power[:, frame] / noise_psd
            instantaneous = np.maximum(posteriori - 1.0, 0.0)
            if previous is None:
                priori = a_dd + (1 - a_dd) * instantaneous
            else:
                priori = a_dd * previous + (1 - a_dd) * instantaneous

            likelihood = posteriori * priori / (1 + priori) - np.log1p(priori)
            if np.mean(likelihood) < self.vad_threshold:
                noise_psd = np.maximum(
                    mu * noise_psd + (1 - mu) * power[:, frame], self.noise_floor
                )

            gain = np.maximum(priori / (1 + priori), self.gain_floor)
            gains[:, frame] = gain
            # |X_hat|^2 / noise, fed back into the next a-priori estimate
            previous = gain**2 * posteriori
        return gains

    def __call__(self, noisy: Waveform) -> Waveform:
        """
        :raise: TooShortError: If the track cannot hold the noise initialization segment and a frame
        """
        samples = noisy.numpy()
        if samples.size < self.min_length:
            raise TooShortError(
                f"Wiener filtering needs at least {self.min_length} samples, got {samples.size}"
            )
        noise_psd = self.initial_noise_psd(samples)
        spectrum = self._analysis(samples)
        gains = self.gains(np.abs(spectrum) ** 2, noise_psd)
        _, enhanced = istft(
            spectrum * gains,
            fs=SAMPLE_RATE,
            window="hamming",
            nperseg=self.frame_length,
            noverlap=self.frame_length - self.hop,
        )
        enhanced = enhanced[: samples.size]
        if enhanced.size < samples.size:
            enhanced = np.pad(enhanced, (0, samples.size - enhanced.size))
        return Waveform.from_numpy(enhanced)


def wiener_baseline(noisy: Waveform) -> Waveform:
    return WienerFilter()(noisy)
