from typing import Callable, Sequence

import numpy as np
import torch

from src.core.audio.waveform import Waveform
from src.core.constants import Framework, ModelFamily
from src.models.spec import default_spec


def white_noise(n: int, seed: int = 0, scale: float = 0.1) -> Waveform:
    return Waveform.from_numpy(scale * np.random.default_rng(seed).standard_normal(n))


def finite_difference_check(
    function: Callable[[torch.Tensor], torch.Tensor],
    x: torch.Tensor,
    indices: Sequence[int],
    eps: float = 1e-6,
) -> float:
    """
    Largest relative gap between the autograd gradient of a scalar ``function`` and central
    differences, over the flat ``indices`` of ``x``.
    """
    x = x.detach().clone().requires_grad_(True)
    function(x).backward()
    analytic = x.grad.reshape(-1)
    flat = x.detach().reshape(-1)
    worst = 0.0
    for index in indices:
        values = []
        for sign in (1.0, -1.0):
            shifted = flat.clone()
            shifted[index] += sign * eps
            with torch.no_grad():
                values.append(float(function(shifted.reshape(x.shape))))
        numeric = (values[0] - values[1]) / (2 * eps)
        exact = float(analytic[index])
        worst = max(worst, abs(numeric - exact) / max(abs(numeric), abs(exact), 1e-12))
    return worst


def spec_json(family: ModelFamily, **overrides) -> dict:
    return default_spec(family, **overrides).model_dump(mode="json")


_TINY_STACK = spec_json(
    ModelFamily.GATED_DILATED_STACK, dilation_schedule=[1, 2, 4], base_channels=4
)
_TINY_CASNET = {
    "family": "casnet",
    "kernel_size": 4,
    "sub_specs": [spec_json(ModelFamily.UNET2D, depth=2, base_channels=4)] * 3,
}
_TINY_DISC2D = spec_json(ModelFamily.DISC2D, depth=2, base_channels=4)

# Run config fields that shrink every trainable framework to toy size.
TINY = {
    Framework.SEGAN: {
        "model_spec": spec_json(ModelFamily.UNET1D, depth=4, base_channels=4),
        "discriminator_spec": spec_json(ModelFamily.DISC1D, depth=2, base_channels=4),
    },
    Framework.WAVENET: {"model_spec": _TINY_STACK},
    Framework.CD_WAVENET: {"model_spec": _TINY_STACK},
    Framework.FSEGAN: {
        "model_spec": spec_json(ModelFamily.UNET2D, depth=4, base_channels=4),
        "discriminator_spec": _TINY_DISC2D,
    },
    Framework.AEGAN: {"model_spec": _TINY_CASNET, "discriminator_spec": _TINY_DISC2D},
    Framework.CD_AEGAN: {"model_spec": _TINY_CASNET, "discriminator_spec": _TINY_DISC2D},
}
