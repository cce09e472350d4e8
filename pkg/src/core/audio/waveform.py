from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass

import numpy as np
import soundfile as sf
import torch

from src.core.constants import SAMPLE_RATE
from src.core.exceptions import DataError
from src.core.utils.logging import ServiceLogger

logger = ServiceLogger(__name__)


@dataclass
class Waveform:
    """
    A mono track at 16 kHz.

    ``samples`` is a 1-D torch tensor (float64 unless built otherwise) so that the TF transforms can
    differentiate through it; metrics read it back through ``numpy()``.
    """

    samples: torch.Tensor
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if not isinstance(self.samples, torch.Tensor):
            self.samples = torch.as_tensor(
                np.asarray(self.samples, dtype=np.float64)
            )
        if self.samples.ndim != 1:
            raise DataError(
                f"Waveform must be mono (1-D), got shape {tuple(self.samples.shape)}"
            )
        if self.sample_rate != SAMPLE_RATE:
            raise DataError(
                f"Only {SAMPLE_RATE} Hz audio is supported, got {self.sample_rate} Hz"
            )
        if not bool(torch.isfinite(self.samples.detach()).all()):
            raise DataError("Waveform contains non-finite samples")

    @property
    def n(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return self.n / self.sample_rate

    @classmethod
    def from_numpy(cls, samples: np.ndarray) -> "Waveform":
        return cls(torch.from_numpy(np.ascontiguousarray(samples, dtype=np.float64)))

    @classmethod
    def zeros(cls, n: int) -> "Waveform":
        return cls(torch.zeros(n, dtype=torch.float64))

    def numpy(self) -> np.ndarray:
        return self.samples.detach().cpu().numpy().astype(np.float64, copy=False)

    def power(self) -> float:
        """Mean power over the full track."""
        return float(np.mean(np.square(self.numpy())))

    def is_silent(self) -> bool:
        return not bool(torch.any(self.samples != 0))


def read_wav(path: str) -> Waveform:
    """
    Reads a mono 16 kHz WAV file into a Waveform with samples in [-1, 1].

    :raise: DataError: If the file is multi-channel, not 16 kHz or unreadable.
    """
    try:
        samples, sample_rate = sf.read(path, dtype="float64", always_2d=True)
    except (RuntimeError, sf.LibsndfileError) as ex:
        raise DataError(f"Could not read WAV file {path}: {ex}")
    if samples.shape[1] != 1:
        raise DataError(f"{path} has {samples.shape[1]} channels, expected mono")
    return Waveform(torch.from_numpy(samples[:, 0].copy()), int(sample_rate))


def write_wav(path: str, waveform: Waveform) -> None:
    """Writes the waveform as 16-bit PCM, clipping to [-1, 1]."""
    samples = np.clip(waveform.numpy(), -1.0, 1.0)
    sf.write(path, samples, waveform.sample_rate, subtype="PCM_16")
    logger.debug(f"Wrote {waveform.n} samples to {path}")


def to_wav_bytes(waveform: Waveform) -> bytes:
    buffer = io.BytesIO()
    sf.write(
        buffer,
        np.clip(waveform.numpy(), -1.0, 1.0),
        waveform.sample_rate,
        format="WAV",
        subtype="PCM_16",
    )
    return buffer.getvalue()


def from_wav_bytes(payload: bytes) -> Waveform:
    try:
        samples, sample_rate = sf.read(
            io.BytesIO(payload), dtype="float64", always_2d=True
        )
    except (RuntimeError, sf.LibsndfileError) as ex:
        raise DataError(f"Payload is not a readable WAV file: {ex}")
    if samples.shape[1] != 1:
        raise DataError("WAV payload must be mono")
    return Waveform(torch.from_numpy(samples[:, 0].copy()), int(sample_rate))


def pcm16_digest(payload: bytes) -> str:
    """
    sha256 of the 16-bit PCM samples inside a WAV payload. Both the ASR client and the stub server
    key lookup tables with it, so the digest only depends on the transmitted samples.
    """
    samples, _ = sf.read(io.BytesIO(payload), dtype="int16", always_2d=True)
    return hashlib.sha256(samples.astype("<i2").tobytes()).hexdigest()


def waveform_digest(waveform: Waveform) -> str:
    return pcm16_digest(to_wav_bytes(waveform))
