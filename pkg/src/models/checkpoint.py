import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import torch
import torch.nn as nn

import src.core.utils.functions as F
from src.core.constants import Framework
from src.core.exceptions import CheckpointMismatchError, DataError
from src.core.utils.logging import ServiceLogger
from src.models.provider import build_model
from src.models.spec import ModelSpec

logger = ServiceLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    """
    Self-describing training snapshot: everything needed to rebuild the networks without the run
    config that produced them.
    """

    framework: Framework
    generator_spec: ModelSpec
    seed: int
    step: int
    epoch: int
    generator_state: Dict[str, torch.Tensor]
    discriminator_spec: Optional[ModelSpec] = None
    discriminator_state: Optional[Dict[str, torch.Tensor]] = None
    compression_scale: Optional[float] = None
    loss_config: Dict[str, Any] = field(default_factory=dict)

    def build_generator(self) -> nn.Module:
        generator = build_model(self.generator_spec, self.seed)
        generator.load_state_dict(self.generator_state)
        return generator

    def build_discriminator(self) -> Optional[nn.Module]:
        if self.discriminator_spec is None:
            return None
        discriminator = build_model(self.discriminator_spec, self.seed + 1)
        discriminator.load_state_dict(self.discriminator_state)
        return discriminator


def save_checkpoint(
    path: str,
    framework: Framework,
    generator: nn.Module,
    seed: int,
    step: int,
    epoch: int,
    discriminator: Optional[nn.Module] = None,
    compression_scale: Optional[float] = None,
    loss_config: Optional[Dict[str, Any]] = None,
):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    record = {
        "version": CHECKPOINT_VERSION,
        "framework": framework.value,
        "seed": seed,
        "step": step,
        "epoch": epoch,
        "compression_scale": compression_scale,
        "loss_config": loss_config or {},
        "generator_spec": generator.spec.model_dump(mode="json"),
        "generator_state": generator.state_dict(),
        "discriminator_spec": (
            discriminator.spec.model_dump(mode="json") if discriminator is not None else None
        ),
        "discriminator_state": (
            discriminator.state_dict() if discriminator is not None else None
        ),
    }
    torch.save(record, path)
    logger.debug(f"Saved checkpoint for epoch {epoch} (step {step}) to {path}")


def load_checkpoint(path: str, framework: Optional[Framework | str] = None) -> Checkpoint:
    """
    Loads a checkpoint written by ``save_checkpoint``.

    :param path: Checkpoint file
    :param framework: Pipeline the caller is about to run; must match the stored framework

    :raise: CheckpointMismatchError: If the stored framework differs from ``framework``
    :raise: DataError: If the file is missing or not a checkpoint
    """
    if not os.path.exists(path):
        raise DataError(f"Checkpoint {path} does not exist")
    try:
        record = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as ex:
        raise DataError(f"Could not read checkpoint {path}: {ex}")
    if not isinstance(record, dict) or record.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path} is not a version {CHECKPOINT_VERSION} checkpoint")

    stored = F.get_enum_from_value(record["framework"], Framework)
    if framework is not None:
        framework = F.get_enum_from_value(framework, Framework)
        if framework != stored:
            raise CheckpointMismatchError(
                f"Checkpoint {path} was trained for {stored.value}, not {framework.value}"
            )
    discriminator_spec = record.get("discriminator_spec")
    return Checkpoint(
        framework=stored,
        generator_spec=ModelSpec.model_validate(record["generator_spec"]),
        seed=record["seed"],
        step=record["step"],
        epoch=record["epoch"],
        generator_state=record["generator_state"],
        discriminator_spec=(
            ModelSpec.model_validate(discriminator_spec) if discriminator_spec else None
        ),
        discriminator_state=record.get("discriminator_state"),
        compression_scale=record.get("compression_scale"),
        loss_config=record.get("loss_config") or {},
    )
