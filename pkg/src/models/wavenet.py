from typing import Tuple

import torch
import torch.nn as nn

from src.models.spec import ModelSpec


class GatedResidualBlock(nn.Module):
    """
    Non-causal dilated convolution with a tanh x sigmoid gate, a residual 1x1 projection added back to
    the input and a 1x1 skip projection. With ``bypass`` the gate is replaced by its filter half, so
    the block is linear.
    """

    def __init__(self, channels: int, kernel_size: int, dilation: int, bypass: bool = False):
        super().__init__()
        self.channels = channels
        self.bypass = bypass
        self.dilated = nn.Conv1d(
            channels,
            2 * channels,
            kernel_size,
            dilation=dilation,
            padding=dilation * (kernel_size - 1) // 2,
        )
        self.residual = nn.Conv1d(channels, channels, 1)
        self.skip = nn.Conv1d(channels, channels, 1)

    def gate(self, x: torch.Tensor) -> torch.Tensor:
        filters, gates = torch.split(self.dilated(x), self.channels, dim=1)
        if self.bypass:
            return filters
        return torch.tanh(filters) * torch.sigmoid(gates)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        h = self.gate(x)
        return x + self.residual(h), self.skip(h)


class GatedDilatedStack(nn.Module):
    """
    Wavenet-style denoiser: 1x1 input projection, residual blocks over the dilation schedule, the
    sum of skip outputs through two 1x1 layers to one output channel. Length preserving for any
    input length; [B, 1, n] in, [B, 1, n] out.
    """

    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = spec
        channels = spec.base_channels
        self.input = nn.Conv1d(1, channels, 1)
        self.blocks = nn.ModuleList(
            [
                GatedResidualBlock(
                    channels, spec.kernel_size, dilation, spec.bypass_activations
                )
                for dilation in spec.dilation_schedule
            ]
        )
        activation = nn.Identity if spec.bypass_activations else nn.ReLU
        self.output = nn.Sequential(
            activation(),
            nn.Conv1d(channels, channels, 1),
            activation(),
            nn.Conv1d(channels, 1, 1),
        )

    @property
    def receptive_field(self) -> int:
        return self.spec.receptive_field

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.input(x)
        skips = 0
        for block in self.blocks:
            h, skip = block(h)
            skips = skips + skip
        return self.output(skips)
