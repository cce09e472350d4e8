from typing import List, Optional, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

import src.core.utils.functions as functions
from src.core.audio.stft import istft_tensor, magnitude_compress, magnitude_decompress, stft
from src.core.audio.waveform import Waveform
from src.core.constants import Framework, ModelFamily
from src.core.exceptions import CheckpointMismatchError
from src.core.utils.logging import ServiceLogger
from src.metrics.wiener import WienerFilter
from src.models.checkpoint import Checkpoint, load_checkpoint
from src.models.provider import generate_tf, generate_time_tensor

logger = ServiceLogger(__name__)


def _dtype(model: nn.Module) -> torch.dtype:
    parameter = next(model.parameters(), None)
    return parameter.dtype if parameter is not None else torch.float64


class Enhancer:
    """
    Runs a trained generator over noisy tracks, one output per input with the input length.

    TF generators go compress -> generate -> decompress -> istft with the noisy phase. The fixed
    length 1-D U-net enhances consecutive windows of its input length, the last one zero-padded.
    The Wiener baseline needs no generator.
    """

    def __init__(
        self,
        framework: Framework,
        generator: Optional[nn.Module] = None,
        compression_scale: Optional[float] = None,
    ):
        self.framework = framework
        self.generator = generator
        self.scale = compression_scale
        self.wiener = WienerFilter() if framework == Framework.WIENER else None
        if generator is not None:
            generator.eval()

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> "Enhancer":
        return cls(
            checkpoint.framework,
            checkpoint.build_generator(),
            checkpoint.compression_scale,
        )

    @classmethod
    def from_path(cls, path: str, framework: Framework | str) -> "Enhancer":
        """
        :raise: CheckpointMismatchError: If the checkpoint was trained for another framework
        """
        return cls.from_checkpoint(load_checkpoint(path, framework))

    def _enhance_tf(self, noisy: Waveform) -> Waveform:
        tf = stft(noisy)
        dtype = _dtype(self.generator)
        y_m = magnitude_compress(tf.magnitude, self.scale).to(dtype)
        x_hat_m = generate_tf(self.generator, y_m).to(torch.float64)
        magnitude = torch.clamp(magnitude_decompress(x_hat_m, self.scale), min=0.0)
        return Waveform(istft_tensor(magnitude, tf.phase, tf.plan))

    def _enhance_windows(self, noisy: Waveform) -> Waveform:
        length = self.generator.spec.input_length
        count = -(-noisy.n // length)
        padded = F.pad(noisy.samples, (0, count * length - noisy.n))
        windows = padded.reshape(count, 1, length).to(_dtype(self.generator))
        enhanced = generate_time_tensor(self.generator, windows)
        return Waveform(enhanced.reshape(-1)[: noisy.n].to(torch.float64))

    def _enhance_time(self, noisy: Waveform) -> Waveform:
        samples = noisy.samples.reshape(1, 1, -1).to(_dtype(self.generator))
        enhanced = generate_time_tensor(self.generator, samples)
        return Waveform(enhanced.reshape(-1).to(torch.float64))

    def enhance(self, noisy: Waveform) -> Waveform:
        if self.wiener is not None:
            return self.wiener(noisy)
        with torch.no_grad():
            family = self.generator.spec.family
            if family in (ModelFamily.UNET2D, ModelFamily.CASNET):
                return self._enhance_tf(noisy)
            if family == ModelFamily.UNET1D:
                return self._enhance_windows(noisy)
            return self._enhance_time(noisy)

    def enhance_batch(self, tracks: Sequence[Waveform]) -> List[Waveform]:
        enhanced = [self.enhance(track) for track in tracks]
        logger.info(f"Enhanced {len(enhanced)} tracks with {self.framework.value}")
        return enhanced


def enhance(
    checkpoint: Optional[Checkpoint | str],
    noisy_tracks: Sequence[Waveform],
    framework: Framework | str = None,
) -> List[Waveform]:
    """
    Enhances ``noisy_tracks`` with a checkpoint (object or path); ``checkpoint`` None runs the
    Wiener baseline.
    """
    if checkpoint is None:
        enhancer = Enhancer(Framework.WIENER)
    elif isinstance(checkpoint, str):
        enhancer = Enhancer.from_path(checkpoint, framework)
    else:
        if framework is not None:
            load_framework = functions.get_enum_from_value(framework, Framework)
            if load_framework != checkpoint.framework:
                raise CheckpointMismatchError(
                    f"Checkpoint was trained for {checkpoint.framework.value}, "
                    f"not {load_framework.value}"
                )
        enhancer = Enhancer.from_checkpoint(checkpoint)
    return enhancer.enhance_batch(noisy_tracks)
