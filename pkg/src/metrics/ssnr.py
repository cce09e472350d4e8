import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from src.core.audio.waveform import Waveform
from src.core.config.manager import ConfigManager
from src.core.constants import ConfigNames
from src.core.exceptions import ShapeError, SilentSignalError, TooShortError
from src.core.utils.logging import ServiceLogger

logger = ServiceLogger(__name__)


def frame_signal(samples: np.ndarray, frame_length: int, hop: int) -> np.ndarray:
    """Full frames only, [n_frames, frame_length]."""
    if samples.shape[-1] < frame_length:
        raise TooShortError(
            f"Track of {samples.shape[-1]} samples is shorter than one {frame_length}-sample frame"
        )
    return sliding_window_view(samples, frame_length)[::hop]


class SegmentalSnr:
    """
    Segmental SNR: the mean over frames of the clamped per-frame SNR in dB. Frames where the clean
    track is silent are left out.
    """

    _CONFIG_SCHEMA = ConfigNames.SSNR

    def __init__(self):
        self.config_client = ConfigManager()
        self.frame_length = 480
        self.hop = 240
        self.window = "rectangular"
        self.min_db = -10.0
        self.max_db = 35.0
        self.silence_energy = 1e-10
        self.reload_config()

    def reload_config(self):
        logger.debug("Reloading config")
        config = self.config_client.load_config(self._CONFIG_SCHEMA) or {}
        for key in config.keys():
            self.__setattr__(key, config[key])

    def _taper(self) -> np.ndarray:
        if self.window in (None, "rectangular", "boxcar"):
            return np.ones(self.frame_length)
        return get_window(self.window, self.frame_length, fftbins=False)

    def frame_values(self, clean: np.ndarray, estimate: np.ndarray) -> np.ndarray:
        """Clamped SNR of every non-silent frame, in dB."""
        taper = self._taper()
        clean_frames = frame_signal(clean, self.frame_length, self.hop) * taper
        error_frames = frame_signal(clean - estimate, self.frame_length, self.hop) * taper
        signal_energy = np.sum(clean_frames**2, axis=1)
        error_energy = np.sum(error_frames**2, axis=1)
        active = signal_energy > self.silence_energy
        if not np.any(active):
            raise SilentSignalError("Every frame of the clean track is silent")
        signal_energy, error_energy = signal_energy[active], error_energy[active]
        with np.errstate(divide="ignore"):
            values = 10.0 * np.log10(signal_energy / error_energy)
        return np.clip(values, self.min_db, self.max_db)

    def __call__(self, clean: Waveform, estimate: Waveform) -> float:
        """
        :raise: ShapeError: If the tracks differ in length
        :raise: SilentSignalError: If the clean track is silent
        """
        if clean.n != estimate.n:
            raise ShapeError(f"Clean ({clean.n}) and estimate ({estimate.n}) lengths differ")
        return float(np.mean(self.frame_values(clean.numpy(), estimate.numpy())))


def ssnr(clean: Waveform, estimate: Waveform) -> float:
    return SegmentalSnr()(clean, estimate)
