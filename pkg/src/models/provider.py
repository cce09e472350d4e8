from typing import Union

import torch
import torch.nn as nn

import src.core.utils.functions as F
from src.core.audio.stft import TfRepresentation
from src.core.audio.waveform import Waveform
from src.core.constants import EMBEDDING_SIZE, ModelFamily
from src.core.exceptions import (
    DomainMismatchError,
    FixedLengthViolationError,
    InvalidSpecError,
    ShapeError,
)
from src.core.utils.logging import ServiceLogger
from src.models.discriminator import (
    DISCRIMINATOR_MODULES,
    ConditionalDiscriminator,
    DiscriminatorOutput,
)
from src.models.spec import TF_GENERATORS, TIME_GENERATORS, ModelSpec
from src.models.unet import UNET_MODULES, UNet1d
from src.models.wavenet import GatedDilatedStack

logger = ServiceLogger(__name__)

MODULES = {
    **UNET_MODULES,
    ModelFamily.GATED_DILATED_STACK: GatedDilatedStack,
    **DISCRIMINATOR_MODULES,
}


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


class ModelProvider:

    @classmethod
    def build(cls, spec: ModelSpec, seed: int) -> nn.Module:
        """
        Builds the network described by ``spec`` with parameters drawn from ``seed``. The global
        torch generator is left untouched, so the same (spec, seed) always gives identical weights.

        :raise: InvalidSpecError: If the spec violates its family invariants
        """
        spec.check()
        family = F.get_enum_from_value(spec.family, ModelFamily)
        if family not in MODULES:
            raise InvalidSpecError(f"Model family {family} not supported")
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            model = MODULES[family](spec)
        model.seed = seed
        logger.info(
            f"Built {family.value} with {count_parameters(model)} parameters (seed {seed})"
        )
        return model


def build_model(spec: ModelSpec, seed: int) -> nn.Module:
    return ModelProvider.build(spec, seed)


def _family(model: nn.Module) -> ModelFamily:
    spec = getattr(model, "spec", None)
    if spec is None:
        raise InvalidSpecError(f"{type(model).__name__} carries no model spec")
    return spec.family


def generate_time_tensor(model: nn.Module, y: torch.Tensor) -> torch.Tensor:
    """[B, 1, n] noisy samples to [B, 1, n] enhanced samples."""
    family = _family(model)
    if family not in TIME_GENERATORS:
        raise DomainMismatchError(f"{family.value} is not a time-domain generator")
    if isinstance(model, UNet1d) and y.shape[-1] != model.spec.input_length:
        raise FixedLengthViolationError(
            f"unet1d takes exactly {model.spec.input_length} samples, got {y.shape[-1]}"
        )
    return model(y)


def generate_time(model: nn.Module, y: Waveform) -> Waveform:
    """
    Enhances one waveform with a time-domain generator; the output has the input length.

    :raise: FixedLengthViolationError: If a unet1d is fed anything but its training length
    """
    parameter = next(model.parameters())
    samples = y.samples.to(dtype=parameter.dtype, device=parameter.device)
    enhanced = generate_time_tensor(model, samples.reshape(1, 1, -1))
    return Waveform(enhanced.reshape(-1).to(torch.float64))


def generate_tf(model: nn.Module, y_m: torch.Tensor) -> torch.Tensor:
    """
    Enhances compressed magnitude embeddings shaped [256, 256] or [B, 1, 256, 256]; the output has
    the input shape.
    """
    family = _family(model)
    if family not in TF_GENERATORS:
        raise DomainMismatchError(f"{family.value} is not a TF-domain generator")
    if tuple(y_m.shape[-2:]) != (EMBEDDING_SIZE, EMBEDDING_SIZE) or y_m.ndim not in (2, 4):
        raise ShapeError(
            f"Expected a {EMBEDDING_SIZE}x{EMBEDDING_SIZE} embedding, got {tuple(y_m.shape)}"
        )
    if y_m.ndim == 2:
        return model(y_m.reshape(1, 1, *y_m.shape)).reshape(y_m.shape)
    return model(y_m)


def _time_batch(x) -> torch.Tensor:
    if isinstance(x, TfRepresentation):
        raise DomainMismatchError("disc1d judges waveforms, got a TF representation")
    if isinstance(x, Waveform):
        x = x.samples
    if x.ndim == 1:
        return x.reshape(1, 1, -1)
    if x.ndim == 2:
        return x.unsqueeze(1)
    if x.ndim == 3 and x.shape[1] == 1:
        return x
    raise DomainMismatchError(f"disc1d judges waveforms, got shape {tuple(x.shape)}")


def _tf_batch(x) -> torch.Tensor:
    if isinstance(x, Waveform):
        raise DomainMismatchError("disc2d judges TF embeddings, got a waveform")
    if isinstance(x, TfRepresentation):
        x = x.magnitude
    if x.ndim == 2:
        return x.reshape(1, 1, *x.shape)
    if x.ndim == 3 and x.shape[1] != 1:
        return x.unsqueeze(1)
    if x.ndim == 4 and x.shape[1] == 1:
        return x
    raise DomainMismatchError(f"disc2d judges TF embeddings, got shape {tuple(x.shape)}")


def discriminate(
    model: ConditionalDiscriminator,
    candidate: Union[torch.Tensor, Waveform, TfRepresentation],
    condition: Union[torch.Tensor, Waveform, TfRepresentation],
) -> DiscriminatorOutput:
    """
    Scores a (candidate, condition) pair. Both must live in the discriminator's domain and share a
    shape.

    :raise: DomainMismatchError: If a disc1d gets TF input or a disc2d gets waveforms
    """
    family = _family(model)
    to_batch = _time_batch if family == ModelFamily.DISC1D else _tf_batch
    if family not in DISCRIMINATOR_MODULES:
        raise DomainMismatchError(f"{family.value} is not a discriminator")
    candidate, condition = to_batch(candidate), to_batch(condition)
    if candidate.shape != condition.shape:
        raise ShapeError(
            f"Candidate {tuple(candidate.shape)} and condition {tuple(condition.shape)} differ"
        )
    parameter = next(model.parameters())
    return model(
        candidate.to(dtype=parameter.dtype), condition.to(dtype=parameter.dtype)
    )
