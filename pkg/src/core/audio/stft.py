from __future__ import annotations

import math
import struct
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from cachetools import LRUCache, cached

import src.core.utils.functions as functions
from src.core.audio.waveform import Waveform
from src.core.config.manager import ConfigManager
from src.core.constants import ConfigNames
from src.core.exceptions import (
    ConfigError,
    DataError,
    LengthOutOfRangeError,
    NegativeMagnitudeError,
    PlanMismatchError,
    ShapeError,
)
from src.core.utils.logging import ServiceLogger

logger = ServiceLogger(__name__)


class WindowKind(Enum):
    HANN = "hann"


# Codes written in the binary TF record header.
WINDOW_CODES = {WindowKind.HANN: 1}

RECORD_MAGIC = b"SETF"
RECORD_VERSION = 1
RECORD_HEADER = struct.Struct("<4sHB8I")


@dataclass(frozen=True)
class StftConfig:
    """Global STFT settings, read from the ``signal`` configuration document."""

    window_length: int = 510
    fft_size: int = 510
    n_frames: int = 256
    window_kind: WindowKind = WindowKind.HANN
    min_length: int = 8000
    max_length: int = 130560
    compression_scale: float = 5.55

    def __post_init__(self):
        object.__setattr__(
            self,
            "window_kind",
            functions.get_enum_from_value(self.window_kind, WindowKind),
        )
        if self.fft_size < self.window_length:
            raise ConfigError(
                f"fft_size {self.fft_size} shorter than window_length {self.window_length}"
            )
        if self.n_frames < 2:
            raise ConfigError("n_frames must be at least 2")
        if self.min_length > self.max_length:
            raise ConfigError(
                f"min_length {self.min_length} exceeds max_length {self.max_length}"
            )
        if self.compression_scale <= 0:
            raise ConfigError("compression_scale must be positive")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @classmethod
    def from_config(cls, config_client: ConfigManager = None) -> "StftConfig":
        config = (config_client or ConfigManager()).require_config(
            ConfigNames.SIGNAL
        )
        known = {field.name for field in fields(cls)}
        return cls(**{k: v for k, v in config.items() if k in known})


@dataclass(frozen=True)
class StftPlan:
    """
    Frame layout of one track: a fixed window and FFT size, a hop chosen per track so that the
    symmetrically zero-padded signal splits into exactly ``n_frames`` frames.
    """

    fft_size: int
    window_length: int
    hop: int
    window_kind: WindowKind
    n_frames: int
    n_bins: int
    original_length: int
    pad_left: int

    @property
    def padded_length(self) -> int:
        return self.window_length + (self.n_frames - 1) * self.hop

    @property
    def pad_right(self) -> int:
        return self.padded_length - self.original_length - self.pad_left

    @property
    def invertible(self) -> bool:
        return 1 <= self.hop <= self.window_length


@cached(LRUCache(maxsize=4096))
def _plan(n: int, config: StftConfig) -> StftPlan:
    hop = max(
        1, math.ceil((n - config.window_length) / (config.n_frames - 1))
    )
    padded_length = config.window_length + (config.n_frames - 1) * hop
    return StftPlan(
        fft_size=config.fft_size,
        window_length=config.window_length,
        hop=hop,
        window_kind=config.window_kind,
        n_frames=config.n_frames,
        n_bins=config.n_bins,
        original_length=n,
        pad_left=(padded_length - n) // 2,
    )


def plan_stft(n: int, config: Optional[StftConfig] = None) -> StftPlan:
    """
    Plans the STFT of a length-``n`` track.

    :param n: Track length in samples
    :param config: STFT settings, defaults to the ``signal`` configuration document

    :returns: StftPlan: a plan yielding ``n_bins`` x ``n_frames`` for the track
    :raise: LengthOutOfRangeError: If n is outside [min_length, max_length]
    """
    config = config or StftConfig.from_config()
    n = int(n)
    if not config.min_length <= n <= config.max_length:
        raise LengthOutOfRangeError(n, config.min_length, config.max_length)
    return _plan(n, config)


@cached(LRUCache(maxsize=16))
def _window(kind: WindowKind, length: int) -> torch.Tensor:
    if kind == WindowKind.HANN:
        # Sampled at half-sample offsets so no tap is zero.
        k = torch.arange(length, dtype=torch.float64)
        return torch.sin(math.pi * (k + 0.5) / length) ** 2
    raise ConfigError(f"Unsupported window kind {kind}")


def analysis_window(plan: StftPlan, dtype=torch.float64, device=None):
    return _window(plan.window_kind, plan.window_length).to(
        dtype=dtype, device=device
    )


def _check_plan(plan: StftPlan):
    if not plan.invertible:
        raise PlanMismatchError(
            f"Plan hop {plan.hop} exceeds window length {plan.window_length}; "
            f"raise the window or lower max_length"
        )


def stft_tensor(
    samples: torch.Tensor, plan: StftPlan
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    STFT of ``[..., n]`` samples into ``[..., n_bins, n_frames]`` magnitude and phase.
    Magnitude is differentiable with respect to the samples; phase is returned detached, in
    (-pi, pi], and 0 wherever the magnitude is 0.
    """
    if samples.shape[-1] != plan.original_length:
        raise PlanMismatchError(
            f"Plan was made for {plan.original_length} samples, got {samples.shape[-1]}"
        )
    _check_plan(plan)
    window = analysis_window(plan, samples.dtype, samples.device)
    padded = F.pad(samples, (plan.pad_left, plan.pad_right))
    frames = padded.unfold(-1, plan.window_length, plan.hop) * window
    spectrum = torch.fft.rfft(frames, n=plan.fft_size, dim=-1).transpose(-1, -2)
    magnitude = spectrum.abs()
    with torch.no_grad():
        phase = torch.angle(spectrum)
        phase = torch.where(phase <= -math.pi, phase + 2 * math.pi, phase)
        phase = torch.where(magnitude == 0, torch.zeros_like(phase), phase)
    return magnitude, phase


def istft_tensor(
    magnitude: torch.Tensor, phase: torch.Tensor, plan: StftPlan
) -> torch.Tensor:
    """
    Least-squares overlap-add inversion of ``[..., n_bins, n_frames]`` magnitude and phase into
    ``[..., original_length]`` samples. Differentiable with respect to both inputs.
    """
    expected = (plan.n_bins, plan.n_frames)
    if tuple(magnitude.shape[-2:]) != expected or magnitude.shape != phase.shape:
        raise ShapeError(
            f"Expected magnitude and phase of shape [..., {expected[0]}, {expected[1]}], "
            f"got {tuple(magnitude.shape)} and {tuple(phase.shape)}"
        )
    _check_plan(plan)
    spectrum = torch.polar(magnitude, phase.to(magnitude.dtype)).transpose(-1, -2)
    frames = torch.fft.irfft(spectrum, n=plan.fft_size, dim=-1)[
        ..., : plan.window_length
    ]
    window = analysis_window(plan, magnitude.dtype, magnitude.device)
    frames = frames * window

    batch_shape = frames.shape[:-2]
    columns = frames.reshape(-1, plan.n_frames, plan.window_length).transpose(1, 2)
    fold = dict(
        output_size=(1, plan.padded_length),
        kernel_size=(1, plan.window_length),
        stride=(1, plan.hop),
    )
    signal = F.fold(columns, **fold)
    norm = F.fold(
        (window**2).reshape(1, -1, 1).expand(1, -1, plan.n_frames), **fold
    )
    signal = (signal / norm).reshape(*batch_shape, plan.padded_length)
    return signal[..., plan.pad_left : plan.pad_left + plan.original_length]


@dataclass
class TfRepresentation:
    """
    Paired magnitude and phase of one track, shaped [n_bins, n_frames], plus the plan that made them.
    ``compressed`` marks magnitudes that went through ``magnitude_compress``.
    """

    magnitude: torch.Tensor
    phase: torch.Tensor
    plan: StftPlan
    compressed: bool = False

    def __post_init__(self):
        expected = (self.plan.n_bins, self.plan.n_frames)
        if tuple(self.magnitude.shape) != expected:
            raise ShapeError(
                f"Magnitude shape {tuple(self.magnitude.shape)} does not match plan {expected}"
            )
        if tuple(self.phase.shape) != expected:
            raise ShapeError(
                f"Phase shape {tuple(self.phase.shape)} does not match plan {expected}"
            )
        if not bool(torch.isfinite(self.magnitude.detach()).all()):
            raise ShapeError("Magnitude contains non-finite values")
        if not self.compressed and bool((self.magnitude.detach() < 0).any()):
            raise NegativeMagnitudeError("Linear magnitude has negative entries")

    def compress(self, scale: Optional[float] = None) -> "TfRepresentation":
        if self.compressed:
            return self
        return replace(
            self, magnitude=magnitude_compress(self.magnitude, scale), compressed=True
        )

    def decompress(self, scale: Optional[float] = None) -> "TfRepresentation":
        if not self.compressed:
            return self
        linear = torch.clamp(magnitude_decompress(self.magnitude, scale), min=0.0)
        return replace(self, magnitude=linear, compressed=False)

    def to_bytes(self) -> bytes:
        """
        Flat binary record: magic, version, plan header, then float32 magnitude and phase in
        row-major order.
        """
        header = RECORD_HEADER.pack(
            RECORD_MAGIC,
            RECORD_VERSION,
            int(self.compressed),
            self.plan.fft_size,
            self.plan.window_length,
            self.plan.hop,
            WINDOW_CODES[self.plan.window_kind],
            self.plan.n_frames,
            self.plan.n_bins,
            self.plan.original_length,
            self.plan.pad_left,
        )
        body = [
            t.detach().cpu().numpy().astype("<f4").tobytes()
            for t in (self.magnitude, self.phase)
        ]
        return header + b"".join(body)

    @classmethod
    def from_bytes(cls, payload: bytes) -> "TfRepresentation":
        if len(payload) < RECORD_HEADER.size:
            raise DataError("TF record is truncated")
        (
            magic,
            version,
            compressed,
            fft_size,
            window_length,
            hop,
            window_code,
            n_frames,
            n_bins,
            original_length,
            pad_left,
        ) = RECORD_HEADER.unpack_from(payload)
        if magic != RECORD_MAGIC or version != RECORD_VERSION:
            raise DataError(f"Not a version {RECORD_VERSION} TF record")
        kinds = {code: kind for kind, code in WINDOW_CODES.items()}
        if window_code not in kinds:
            raise DataError(f"Unknown window code {window_code} in TF record")
        plan = StftPlan(
            fft_size=fft_size,
            window_length=window_length,
            hop=hop,
            window_kind=kinds[window_code],
            n_frames=n_frames,
            n_bins=n_bins,
            original_length=original_length,
            pad_left=pad_left,
        )
        size = n_bins * n_frames
        values = np.frombuffer(payload, dtype="<f4", offset=RECORD_HEADER.size)
        if values.size != 2 * size:
            raise DataError(
                f"TF record body holds {values.size} values, expected {2 * size}"
            )
        arrays = values.astype(np.float64).reshape(2, n_bins, n_frames)
        return cls(
            torch.from_numpy(arrays[0].copy()),
            torch.from_numpy(arrays[1].copy()),
            plan,
            compressed=bool(compressed),
        )


def stft(waveform: Waveform, plan: Optional[StftPlan] = None) -> TfRepresentation:
    """
    STFT of a waveform under its plan (planned from the waveform length when omitted).

    :raise: PlanMismatchError: If the plan was made for a different length
    """
    plan = plan or plan_stft(waveform.n)
    magnitude, phase = stft_tensor(waveform.samples, plan)
    return TfRepresentation(magnitude, phase, plan)


def istft(tf: TfRepresentation) -> Waveform:
    """Inverts a TF representation to exactly ``plan.original_length`` samples."""
    tf = tf.decompress()
    return Waveform(istft_tensor(tf.magnitude, tf.phase, tf.plan))


def _scale(scale: Optional[float]) -> float:
    return scale if scale is not None else StftConfig.from_config().compression_scale


def magnitude_compress(magnitude, scale: Optional[float] = None):
    """
    z = log1p(m) / scale. Monotone, maps 0 to 0 and keeps in-corpus magnitudes within [0, 1].
    Accepts torch tensors or numpy arrays and returns the same kind.

    :raise: NegativeMagnitudeError: If any entry is negative
    """
    scale = _scale(scale)
    if isinstance(magnitude, np.ndarray):
        if np.any(magnitude < 0):
            raise NegativeMagnitudeError("Cannot compress negative magnitudes")
        return np.log1p(magnitude) / scale
    if bool((magnitude.detach() < 0).any()):
        raise NegativeMagnitudeError("Cannot compress negative magnitudes")
    return torch.log1p(magnitude) / scale


def magnitude_decompress(compressed, scale: Optional[float] = None):
    """Inverse of ``magnitude_compress``: m = expm1(scale * z)."""
    scale = _scale(scale)
    if isinstance(compressed, np.ndarray):
        return np.expm1(compressed * scale)
    return torch.expm1(compressed * scale)
