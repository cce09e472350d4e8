from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from src.core.audio.waveform import Waveform
from src.core.config.manager import ConfigManager
from src.core.constants import ConfigNames
from src.core.exceptions import DataError, NoiseTooShortError, ShapeError, SilentSignalError
from src.core.utils.logging import ServiceLogger

logger = ServiceLogger(__name__)


@dataclass
class TrackPair:
    """A clean track and its noisy mixture, sample aligned."""

    clean: Waveform
    noisy: Waveform
    snr_db: float
    noise_id: str
    speaker_id: str
    sentence_id: str
    track_id: str = ""
    transcript: Optional[str] = None
    noise_gain: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if self.clean.n != self.noisy.n:
            raise ShapeError(
                f"Clean ({self.clean.n}) and noisy ({self.noisy.n}) lengths differ"
            )
        if not self.track_id:
            self.track_id = f"{self.speaker_id}_{self.sentence_id}"

    @property
    def n(self) -> int:
        return self.clean.n


def snr_tolerance_db() -> float:
    config = ConfigManager().load_config(ConfigNames.MIXING) or {}
    return float(config.get("snr_tolerance_db", 0.01))


def snr_gain(clean_power: float, noise_power: float, snr_db: float) -> float:
    """g = sqrt(P_clean / (P_noise * 10^(snr_db / 10)))."""
    return float(np.sqrt(clean_power / (noise_power * 10.0 ** (snr_db / 10.0))))


def measured_snr(pair: TrackPair) -> float:
    clean = pair.clean.numpy()
    noise = pair.noisy.numpy() - clean
    return float(10.0 * np.log10(np.mean(clean**2) / np.mean(noise**2)))


def mix_at_snr(
    clean: Waveform,
    noise: Waveform,
    snr_db: float,
    seed: int,
    noise_id: str = "noise",
    speaker_id: str = "speaker",
    sentence_id: str = "sentence",
    **metadata,
) -> TrackPair:
    """
    Adds a seeded segment of ``noise`` to ``clean`` at ``snr_db``, with powers measured over the full
    track.

    :raise: SilentSignalError: If the clean track or the chosen noise segment is all zeros
    :raise: NoiseTooShortError: If the noise is shorter than the clean track
    :raise: DataError: If the measured SNR of the mixture misses the target by more than the
        data-mixing tolerance
    """
    if clean.is_silent():
        raise SilentSignalError("Cannot mix a silent clean track at a target SNR")
    if noise.n < clean.n:
        raise NoiseTooShortError(
            f"Noise has {noise.n} samples, clean track needs {clean.n}"
        )
    rng = np.random.default_rng(seed)
    offset = int(rng.integers(0, noise.n - clean.n + 1))
    segment = noise.numpy()[offset : offset + clean.n]
    clean_samples = clean.numpy()
    noise_power = float(np.mean(segment**2))
    if noise_power == 0:
        raise SilentSignalError(f"Noise segment at offset {offset} is silent")
    gain = snr_gain(float(np.mean(clean_samples**2)), noise_power, snr_db)
    noisy = Waveform(torch.from_numpy(clean_samples + gain * segment))
    logger.debug(f"Mixed at {snr_db} dB, noise offset {offset}, gain {gain:.4f}")
    pair = TrackPair(
        clean=Waveform(torch.from_numpy(clean_samples.copy())),
        noisy=noisy,
        snr_db=float(snr_db),
        noise_id=noise_id,
        speaker_id=speaker_id,
        sentence_id=sentence_id,
        noise_gain=gain,
        **metadata,
    )
    measured = measured_snr(pair)
    if abs(measured - snr_db) > snr_tolerance_db():
        raise DataError(f"Mixture measures {measured:.4f} dB, target was {snr_db} dB")
    return pair
