from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Union

import torch

import src.core.utils.functions as F
from src.core.audio.waveform import Waveform
from src.core.exceptions import LossConfigError, ProbabilityDomainError, ShapeError
from src.models.discriminator import ConditionalDiscriminator, DiscriminatorOutput
from src.models.provider import discriminate

LOG_FLOOR = 1e-12

Tensorish = Union[torch.Tensor, float, Waveform]


class AdversarialMode(Enum):
    LOG = "log"
    LEAST_SQUARES = "least_squares"


@dataclass
class AdversarialObjectives:
    """
    ``discriminator`` is the objective the discriminator maximizes; ``generator`` is the loss the
    generator minimizes.
    """

    discriminator: torch.Tensor
    generator: torch.Tensor

    @property
    def discriminator_loss(self) -> torch.Tensor:
        return -self.discriminator


def _tensor(value: Tensorish) -> torch.Tensor:
    if isinstance(value, Waveform):
        return value.samples
    if isinstance(value, torch.Tensor):
        return value
    return torch.as_tensor(value, dtype=torch.float64)


def adv_loss(
    d_real: Tensorish,
    d_fake: Tensorish,
    mode: AdversarialMode | str = AdversarialMode.LOG,
) -> AdversarialObjectives:
    """
    Adversarial objectives from discriminator probabilities on real and enhanced pairs, averaged over
    the batch. In log mode the discriminator maximizes log D(real) + log(1 - D(fake)) and the
    generator minimizes -log D(fake). The least-squares mode uses squared distances to the labels.

    :raise: ProbabilityDomainError: If a probability lies outside [0, 1]
    """
    mode = F.get_enum_from_value(mode, AdversarialMode)
    d_real, d_fake = _tensor(d_real), _tensor(d_fake)
    for name, value in (("d_real", d_real), ("d_fake", d_fake)):
        detached = value.detach()
        if not bool(torch.isfinite(detached).all()) or bool(
            ((detached < 0) | (detached > 1)).any()
        ):
            raise ProbabilityDomainError(f"{name} must lie in [0, 1]")

    if mode == AdversarialMode.LEAST_SQUARES:
        discriminator = -0.5 * ((d_real - 1) ** 2 + d_fake**2).mean()
        generator = 0.5 * ((d_fake - 1) ** 2).mean()
        return AdversarialObjectives(discriminator, generator)

    discriminator = (
        torch.log(torch.clamp(d_real, min=LOG_FLOOR))
        + torch.log(torch.clamp(1 - d_fake, min=LOG_FLOOR))
    ).mean()
    generator = -torch.log(torch.clamp(d_fake, min=LOG_FLOOR)).mean()
    return AdversarialObjectives(discriminator, generator)


def l1_time(
    x: Tensorish, x_hat: Tensorish, mask: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """
    Mean absolute sample difference. With a validity mask the mean runs over real samples only.

    :raise: ShapeError: If the lengths differ
    """
    x, x_hat = _tensor(x), _tensor(x_hat)
    if x.shape != x_hat.shape:
        raise ShapeError(
            f"l1_time needs equal lengths, got {tuple(x.shape)} and {tuple(x_hat.shape)}"
        )
    difference = torch.abs(x - x_hat)
    if mask is None:
        return difference.mean()
    mask = mask.to(difference.dtype).reshape(difference.shape)
    return (difference * mask).sum() / mask.sum()


def l1_tf(x_m: torch.Tensor, x_hat_m: torch.Tensor) -> torch.Tensor:
    """
    Mean absolute pixel difference between two magnitude embeddings.

    :raise: ShapeError: If the shapes differ
    """
    if x_m.shape != x_hat_m.shape:
        raise ShapeError(
            f"l1_tf needs equal shapes, got {tuple(x_m.shape)} and {tuple(x_hat_m.shape)}"
        )
    return torch.abs(x_m - x_hat_m).mean()


FeatureExtractor = Union[
    ConditionalDiscriminator, Callable[[torch.Tensor], Sequence[torch.Tensor]]
]


def _features(
    extractor: FeatureExtractor, x: torch.Tensor, condition: Optional[torch.Tensor]
) -> List[torch.Tensor]:
    if isinstance(extractor, ConditionalDiscriminator):
        if condition is None:
            raise LossConfigError("A conditional discriminator needs the noisy condition")
        return discriminate(extractor, x, condition).features
    output = extractor(x)
    if isinstance(output, DiscriminatorOutput):
        return output.features
    return list(output)


def feature_loss(
    x_m: torch.Tensor,
    x_hat_m: torch.Tensor,
    discriminator: FeatureExtractor,
    weights: Sequence[float],
    condition: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """
    Sum over the discriminator layers of lambda_k times the mean absolute difference between the
    feature maps of target and enhanced inputs. Target features carry no gradient.

    :raise: LossConfigError: If len(weights) differs from the number of feature layers
    """
    with torch.no_grad():
        real = _features(discriminator, x_m, condition)
    fake = _features(discriminator, x_hat_m, condition)
    if len(weights) != len(fake):
        raise LossConfigError(
            f"{len(weights)} feature weights for {len(fake)} discriminator layers"
        )
    total = 0.0
    for weight, real_k, fake_k in zip(weights, real, fake):
        total = total + weight * torch.abs(real_k - fake_k).mean()
    return torch.as_tensor(total) if not isinstance(total, torch.Tensor) else total
