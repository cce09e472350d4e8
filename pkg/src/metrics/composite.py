from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.linalg import LinAlgError, solve_toeplitz, toeplitz

from src.core.audio.waveform import Waveform
from src.core.config.manager import ConfigManager
from src.core.constants import SAMPLE_RATE, ConfigNames
from src.core.exceptions import MissingPesqError, ShapeError, TooShortError
from src.core.utils.logging import ServiceLogger

logger = ServiceLogger(__name__)

# Critical-band centre frequencies and bandwidths (Hz) of the weighted spectral slope measure.
CENTER_FREQUENCIES = np.array(
    [
        50.0, 120.0, 190.0, 260.0, 330.0, 400.0, 470.0, 540.0, 617.372, 703.378, 798.717,
        904.550, 1020.550, 1148.490, 1288.960, 1444.060, 1614.350, 1802.090, 2007.750,
        2233.690, 2481.570, 2753.920, 3051.810, 3378.540, 3736.700,
    ]
)
BANDWIDTHS = np.array(
    [
        70.0, 70.0, 70.0, 70.0, 70.0, 70.0, 70.0, 77.3724, 86.0056, 95.3398, 105.411, 116.256,
        127.914, 140.423, 153.823, 168.154, 183.457, 199.776, 217.153, 235.631, 255.255,
        276.072, 298.126, 321.465, 346.136,
    ]
)
WSS_KMAX = 20.0
WSS_KLOCMAX = 1.0
ENERGY_FLOOR = 1e-10


class CompositeSettings(BaseModel):
    frame_seconds: float = 0.03
    overlap: float = 0.75
    lpc_order: int = 16
    best_fraction: float = 0.95
    llr_max: float = 2.0

    @classmethod
    def from_config(cls) -> "CompositeSettings":
        return cls(**(ConfigManager().load_config(ConfigNames.COMPOSITE) or {}))

    @property
    def frame_length(self) -> int:
        return int(round(self.frame_seconds * SAMPLE_RATE))

    @property
    def hop(self) -> int:
        return int(np.floor((1 - self.overlap) * self.frame_length))


def _frames(x: np.ndarray, settings: CompositeSettings) -> np.ndarray:
    length, hop = settings.frame_length, settings.hop
    count = int(x.size / hop - length / hop)
    if count < 1:
        raise TooShortError(f"Track of {x.size} samples holds no {length}-sample frame")
    window = 0.5 * (1 - np.cos(2 * np.pi * np.arange(1, length + 1) / (length + 1)))
    return np.stack([x[i * hop : i * hop + length] * window for i in range(count)])


def _best_mean(values: np.ndarray, fraction: float) -> float:
    values = np.sort(values)
    return float(np.mean(values[: max(1, int(round(values.size * fraction)))]))


def _pair(clean: Waveform, estimate: Waveform) -> Tuple[np.ndarray, np.ndarray]:
    if clean.n != estimate.n:
        raise ShapeError(f"Clean ({clean.n}) and estimate ({estimate.n}) lengths differ")
    return clean.numpy(), estimate.numpy()


def _autocorrelation(frame: np.ndarray, order: int) -> np.ndarray:
    r = np.array([np.dot(frame[: frame.size - k], frame[k:]) for k in range(order + 1)])
    r[0] += ENERGY_FLOOR
    return r


def _lpc(r: np.ndarray, order: int) -> np.ndarray:
    """Prediction polynomial [1, -a_1, ..., -a_p] from autocorrelation lags 0..p."""
    try:
        a = solve_toeplitz(r[:order], r[1 : order + 1])
    except LinAlgError:
        a = np.zeros(order)
    return np.concatenate([[1.0], -a])


def llr(clean: Waveform, estimate: Waveform, settings: CompositeSettings = None) -> float:
    """
    Log-likelihood ratio between the LPC models of clean and estimate frames, each frame clipped
    to [0, llr_max], averaged over the best frames.
    """
    settings = settings or CompositeSettings.from_config()
    x, y = _pair(clean, estimate)
    order = settings.lpc_order
    values = []
    for clean_frame, estimate_frame in zip(_frames(x, settings), _frames(y, settings)):
        r_clean = _autocorrelation(clean_frame, order)
        a_clean = _lpc(r_clean, order)
        a_estimate = _lpc(_autocorrelation(estimate_frame, order), order)
        covariance = toeplitz(r_clean)
        numerator = a_estimate @ covariance @ a_estimate
        denominator = a_clean @ covariance @ a_clean
        values.append(np.log(max(numerator, ENERGY_FLOOR) / max(denominator, ENERGY_FLOOR)))
    values = np.clip(np.array(values), 0.0, settings.llr_max)
    return _best_mean(values, settings.best_fraction)


def _critical_band_filters(fft_size: int) -> np.ndarray:
    half = fft_size // 2
    max_frequency = SAMPLE_RATE / 2
    min_factor = np.exp(-30.0 / (2 * 2.303))
    bins = np.arange(half)
    filters = np.zeros((CENTER_FREQUENCIES.size, half))
    for band, (center, bandwidth) in enumerate(zip(CENTER_FREQUENCIES, BANDWIDTHS)):
        f0 = center / max_frequency * half
        bw = bandwidth / max_frequency * half
        norm_factor = np.log(BANDWIDTHS[0]) - np.log(bandwidth)
        response = np.exp(-11 * ((bins - np.floor(f0)) / bw) ** 2 + norm_factor)
        filters[band] = response * (response > min_factor)
    return filters


def _nearest_peaks(energy: np.ndarray, slope: np.ndarray) -> np.ndarray:
    bands = energy.size
    peaks = np.zeros(bands - 1)
    for i in range(bands - 1):
        n = i
        if slope[i] > 0:
            while n < bands - 1 and slope[n] > 0:
                n += 1
            peaks[i] = energy[n - 1]
        else:
            while n >= 0 and slope[n] <= 0:
                n -= 1
            peaks[i] = energy[n + 1]
    return peaks


def wss(clean: Waveform, estimate: Waveform, settings: CompositeSettings = None) -> float:
    """Weighted spectral slope distance over 25 critical bands, averaged over the best frames."""
    settings = settings or CompositeSettings.from_config()
    x, y = _pair(clean, estimate)
    fft_size = int(2 ** np.ceil(np.log2(2 * settings.frame_length)))
    filters = _critical_band_filters(fft_size)

    def band_energy(frames):
        spectrum = np.abs(np.fft.fft(frames, fft_size, axis=1)) ** 2
        return 10 * np.log10(np.maximum(spectrum[:, : fft_size // 2] @ filters.T, ENERGY_FLOOR))

    clean_energy = band_energy(_frames(x, settings))
    estimate_energy = band_energy(_frames(y, settings))
    values = []
    for e_clean, e_estimate in zip(clean_energy, estimate_energy):
        slope_clean = np.diff(e_clean)
        slope_estimate = np.diff(e_estimate)
        weights = []
        for energy, slope in ((e_clean, slope_clean), (e_estimate, slope_estimate)):
            w_max = WSS_KMAX / (WSS_KMAX + np.max(energy) - energy[:-1])
            w_local = WSS_KLOCMAX / (WSS_KLOCMAX + _nearest_peaks(energy, slope) - energy[:-1])
            weights.append(w_max * w_local)
        w = (weights[0] + weights[1]) / 2
        values.append(np.sum(w * (slope_clean - slope_estimate) ** 2) / np.sum(w))
    return _best_mean(np.array(values), settings.best_fraction)


def composite_measures(
    pesq: Optional[float], llr: float, wss: float, ssnr: float
) -> Tuple[float, float, float]:
    """
    Composite MOS predictors (CSIG, CBAK, COVL), each clipped to [1, 5].

    :raise: MissingPesqError: If no PESQ score is available
    """
    if pesq is None:
        raise MissingPesqError()
    csig = 3.093 - 1.029 * llr + 0.603 * pesq - 0.009 * wss
    cbak = 1.634 + 0.478 * pesq - 0.007 * wss + 0.063 * ssnr
    covl = 1.594 + 0.805 * pesq - 0.512 * llr - 0.007 * wss
    return tuple(float(np.clip(value, 1.0, 5.0)) for value in (csig, cbak, covl))
