from dataclasses import dataclass
from typing import List

import torch
import torch.nn as nn

from src.core.constants import ModelFamily
from src.models.spec import ModelSpec


@dataclass
class DiscriminatorOutput:
    """
    ``probability`` has shape [B] and lies in (0, 1); ``features`` are the K per-layer feature maps
    used by the feature-matching loss.
    """

    probability: torch.Tensor
    logits: torch.Tensor
    features: List[torch.Tensor]


class ConditionalDiscriminator(nn.Module):
    """
    Binary classifier over (candidate, condition) pairs stacked as two input channels. K strided
    convolutions with leaky ReLU produce the feature maps, a 1x1 convolution averaged over positions
    gives one logit per item.
    """

    dimensions = 1

    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = spec
        conv = nn.Conv1d if self.dimensions == 1 else nn.Conv2d
        padding = (
            spec.kernel_size // 2 if self.dimensions == 1 else (spec.kernel_size - 2) // 2
        )
        slope = 0.3 if self.dimensions == 1 else 0.2
        self.layers = nn.ModuleList()
        in_channels = 2
        for level in range(spec.depth):
            out_channels = min(spec.base_channels * 2**level, spec.max_channels)
            self.layers.append(
                nn.Sequential(
                    conv(in_channels, out_channels, spec.kernel_size, stride=2, padding=padding),
                    nn.LeakyReLU(slope),
                )
            )
            in_channels = out_channels
        self.classifier = conv(in_channels, 1, 1)

    @property
    def n_features(self) -> int:
        return len(self.layers)

    def forward(self, candidate: torch.Tensor, condition: torch.Tensor) -> DiscriminatorOutput:
        h = torch.cat([candidate, condition], dim=1)
        features = []
        for layer in self.layers:
            h = layer(h)
            features.append(h)
        logits = self.classifier(h).flatten(start_dim=1).mean(dim=1)
        return DiscriminatorOutput(torch.sigmoid(logits), logits, features)


class Discriminator1d(ConditionalDiscriminator):
    dimensions = 1


class Discriminator2d(ConditionalDiscriminator):
    dimensions = 2


DISCRIMINATOR_MODULES = {
    ModelFamily.DISC1D: Discriminator1d,
    ModelFamily.DISC2D: Discriminator2d,
}
