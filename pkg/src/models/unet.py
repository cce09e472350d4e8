import torch
import torch.nn as nn

from src.core.constants import ModelFamily
from src.models.spec import ModelSpec


def _channels(spec: ModelSpec, levels: int):
    return [min(spec.base_channels * 2**i, spec.max_channels) for i in range(levels)]


class UNet1d(nn.Module):
    """
    Fully convolutional 1-D encoder-decoder over raw waveforms. Strided convolutions halve the time
    axis, transposed convolutions restore it and every decoder level is concatenated with the
    encoder output of the same resolution. Input and output are [B, 1, input_length].
    """

    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = spec
        levels = spec.depth // 2
        padding = spec.kernel_size // 2
        channels = _channels(spec, levels)

        self.encoders = nn.ModuleList()
        in_channels = 1
        for out_channels in channels:
            self.encoders.append(
                nn.Sequential(
                    nn.Conv1d(
                        in_channels,
                        out_channels,
                        spec.kernel_size,
                        stride=2,
                        padding=padding,
                    ),
                    nn.PReLU(out_channels),
                )
            )
            in_channels = out_channels

        self.decoders = nn.ModuleList()
        for level in range(levels):
            in_channels = channels[-1] if level == 0 else 2 * channels[levels - 1 - level]
            last = level == levels - 1
            out_channels = 1 if last else channels[levels - 2 - level]
            self.decoders.append(
                nn.Sequential(
                    nn.ConvTranspose1d(
                        in_channels,
                        out_channels,
                        spec.kernel_size,
                        stride=2,
                        padding=padding,
                        output_padding=1,
                    ),
                    nn.Tanh() if last else nn.PReLU(out_channels),
                )
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        length = x.shape[-1]
        skips = []
        h = x
        for encoder in self.encoders:
            h = encoder(h)
            skips.append(h)
        skips.pop()
        for decoder in self.decoders:
            h = decoder(h)
            if skips:
                skip = skips.pop()
                h = torch.cat([h[..., : skip.shape[-1]], skip], dim=1)
        return h[..., :length]


class UNet2d(nn.Module):
    """
    Image-to-image U-net over [B, 1, 256, 256] magnitude embeddings: 4x4 stride-2 convolutions
    with batch normalization and leaky ReLU down, transposed convolutions with ReLU up, and a tanh
    output layer.
    """

    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = spec
        levels = spec.depth // 2
        channels = _channels(spec, levels)
        padding = (spec.kernel_size - 2) // 2

        self.encoders = nn.ModuleList()
        in_channels = 1
        for level, out_channels in enumerate(channels):
            # No normalization on the input layer and on the 1x1 innermost layer.
            normalize = 0 < level < levels - 1
            self.encoders.append(
                nn.Sequential(
                    nn.Conv2d(
                        in_channels,
                        out_channels,
                        spec.kernel_size,
                        stride=2,
                        padding=padding,
                        bias=not normalize,
                    ),
                    nn.BatchNorm2d(out_channels) if normalize else nn.Identity(),
                    nn.LeakyReLU(0.2),
                )
            )
            in_channels = out_channels

        self.decoders = nn.ModuleList()
        for level in range(levels):
            in_channels = channels[-1] if level == 0 else 2 * channels[levels - 1 - level]
            last = level == levels - 1
            out_channels = 1 if last else channels[levels - 2 - level]
            self.decoders.append(
                nn.Sequential(
                    nn.ConvTranspose2d(
                        in_channels,
                        out_channels,
                        spec.kernel_size,
                        stride=2,
                        padding=padding,
                        bias=last,
                    ),
                    nn.Identity() if last else nn.BatchNorm2d(out_channels),
                    nn.Tanh() if last else nn.ReLU(),
                )
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        skips = []
        h = x
        for encoder in self.encoders:
            h = encoder(h)
            skips.append(h)
        skips.pop()
        for decoder in self.decoders:
            h = decoder(h)
            if skips:
                h = torch.cat([h, skips.pop()], dim=1)
        return h


class CasNet(nn.Module):
    """Three U-nets applied one after the other."""

    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = spec
        self.stages = nn.ModuleList([UNet2d(sub_spec) for sub_spec in spec.sub_specs])

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for stage in self.stages:
            x = stage(x)
        return x


UNET_MODULES = {
    ModelFamily.UNET1D: UNet1d,
    ModelFamily.UNET2D: UNet2d,
    ModelFamily.CASNET: CasNet,
}
