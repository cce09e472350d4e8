"""
Run configuration and the framework legality matrix.

Each framework fixes its generator family, its discriminator family (if adversarial), how training
data is fed and exactly which loss terms it is penalized with.
"""

import json
import os
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

import src.core.utils.functions as F
from src.core.config.manager import ConfigManager
from src.core.constants import ConfigNames, DomainBridge, Framework, LossKind, ModelFamily
from src.core.exceptions import ConfigError, IllegalCombinationError
from src.core.utils.logging import ServiceLogger
from src.losses.composite import LossConfig, default_loss_config
from src.models.spec import ModelSpec, default_spec

logger = ServiceLogger(__name__)


class Feeding(Enum):
    FIXED = "fixed"  # one-second segments
    VARIABLE = "variable"  # whole tracks, zero-padded batches with validity masks
    WHOLE = "whole"  # whole tracks through the dynamic-resolution TF embedding


@dataclass(frozen=True)
class FrameworkRule:
    generator: Optional[ModelFamily]
    discriminator: Optional[ModelFamily]
    feeding: Optional[Feeding]
    wiring: FrozenSet[Tuple[LossKind, DomainBridge]]

    @property
    def adversarial(self) -> bool:
        return self.discriminator is not None

    @property
    def trainable(self) -> bool:
        return self.generator is not None


def _wiring(*terms: Tuple[LossKind, DomainBridge]) -> FrozenSet[Tuple[LossKind, DomainBridge]]:
    return frozenset(terms)


_NONE = DomainBridge.NONE
FRAMEWORK_RULES: Dict[Framework, FrameworkRule] = {
    Framework.WIENER: FrameworkRule(None, None, None, frozenset()),
    Framework.SEGAN: FrameworkRule(
        ModelFamily.UNET1D,
        ModelFamily.DISC1D,
        Feeding.FIXED,
        _wiring((LossKind.ADV, _NONE), (LossKind.L1_TIME, _NONE)),
    ),
    Framework.WAVENET: FrameworkRule(
        ModelFamily.GATED_DILATED_STACK,
        None,
        Feeding.VARIABLE,
        _wiring((LossKind.L1_TIME, _NONE)),
    ),
    Framework.CD_WAVENET: FrameworkRule(
        ModelFamily.GATED_DILATED_STACK,
        None,
        Feeding.VARIABLE,
        _wiring((LossKind.L1_TIME, _NONE), (LossKind.L1_TF, DomainBridge.STFT)),
    ),
    Framework.FSEGAN: FrameworkRule(
        ModelFamily.UNET2D,
        ModelFamily.DISC2D,
        Feeding.FIXED,
        _wiring((LossKind.ADV, _NONE), (LossKind.L1_TF, _NONE)),
    ),
    Framework.AEGAN: FrameworkRule(
        ModelFamily.CASNET,
        ModelFamily.DISC2D,
        Feeding.WHOLE,
        _wiring((LossKind.ADV, _NONE), (LossKind.FEATURE, _NONE), (LossKind.L1_TF, _NONE)),
    ),
    Framework.CD_AEGAN: FrameworkRule(
        ModelFamily.CASNET,
        ModelFamily.DISC2D,
        Feeding.WHOLE,
        _wiring(
            (LossKind.ADV, _NONE),
            (LossKind.FEATURE, _NONE),
            (LossKind.L1_TF, _NONE),
            (LossKind.L1_TIME, DomainBridge.ISTFT_WITH_NOISY_PHASE),
        ),
    ),
}


def rule_for(framework: Framework | str) -> FrameworkRule:
    return FRAMEWORK_RULES[F.get_enum_from_value(framework, Framework)]


def _training_defaults() -> Dict[str, Any]:
    return ConfigManager().load_config(ConfigNames.TRAINING) or {}


class RunConfig(BaseModel):
    """
    One training or evaluation run. Unset model specs and loss wiring default to the framework's
    recipe; unset optimizer knobs come from the harness-training config document. ``components``
    overrides named config documents for the duration of the run.
    """

    model_config = ConfigDict(extra="forbid")

    framework: Framework
    name: Optional[str] = None
    manifest: Optional[str] = None
    model_spec: Optional[ModelSpec] = None
    discriminator_spec: Optional[ModelSpec] = None
    loss_config: Optional[LossConfig] = None
    seed: int = 0
    snr_list: List[float] = Field(default_factory=lambda: [0.0, 5.0])
    epochs: Optional[int] = Field(default=None, ge=0)
    batch_size: Optional[int] = Field(default=None, ge=1)
    learning_rate: Optional[float] = Field(default=None, gt=0)
    betas: Optional[Tuple[float, float]] = None
    d_steps_per_g_step: Optional[int] = Field(default=None, ge=1)
    max_items_per_epoch: Optional[int] = Field(default=None, ge=1)
    log_every: Optional[int] = Field(default=None, ge=1)
    calibrate: bool = True
    workers: int = Field(default=1, ge=1)
    components: Dict[str, Dict[str, Any]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _fill_defaults(self):
        # The run's own harness-training component wins over the shared document.
        defaults = {**_training_defaults(), **self.components.get(ConfigNames.TRAINING, {})}
        for key in (
            "epochs",
            "batch_size",
            "learning_rate",
            "betas",
            "d_steps_per_g_step",
            "max_items_per_epoch",
            "log_every",
        ):
            if getattr(self, key) is None and defaults.get(key) is not None:
                value = defaults[key]
                setattr(self, key, tuple(value) if key == "betas" else value)
        if self.name is None:
            self.name = self.framework.value
        rule = FRAMEWORK_RULES[self.framework]
        if rule.trainable:
            if self.model_spec is None:
                self.model_spec = default_spec(rule.generator)
            if self.discriminator_spec is None and rule.adversarial:
                self.discriminator_spec = default_spec(rule.discriminator)
            if self.loss_config is None:
                self.loss_config = default_loss_config(self.framework)
        return self

    @property
    def rule(self) -> FrameworkRule:
        return FRAMEWORK_RULES[self.framework]

    def check(self) -> "RunConfig":
        """
        Enforces the legality matrix.

        :raise: IllegalCombinationError: If the model families or the loss wiring do not match the
            framework
        :raise: InvalidSpecError: If a model spec violates its family invariants
        """
        rule = self.rule
        if not rule.trainable:
            if self.model_spec or self.discriminator_spec or self.loss_config:
                raise IllegalCombinationError(
                    f"{self.framework.value} is not trained; drop model specs and losses"
                )
            return self

        if self.model_spec.family != rule.generator:
            raise IllegalCombinationError(
                f"{self.framework.value} needs a {rule.generator.value} generator, "
                f"got {self.model_spec.family.value}"
            )
        self.model_spec.check()
        if rule.adversarial:
            if self.discriminator_spec.family != rule.discriminator:
                raise IllegalCombinationError(
                    f"{self.framework.value} needs a {rule.discriminator.value} discriminator, "
                    f"got {self.discriminator_spec.family.value}"
                )
            self.discriminator_spec.check()
        elif self.discriminator_spec is not None:
            raise IllegalCombinationError(f"{self.framework.value} has no discriminator")

        wiring = frozenset((term.kind, term.bridge) for term in self.loss_config.terms)
        if wiring != rule.wiring:
            missing = sorted(f"{k.value}/{b.value}" for k, b in rule.wiring - wiring)
            extra = sorted(f"{k.value}/{b.value}" for k, b in wiring - rule.wiring)
            raise IllegalCombinationError(
                f"{self.framework.value} loss wiring mismatch; missing {missing}, "
                f"unexpected {extra}"
            )
        self.loss_config.check_wiring(self.model_spec.domain)
        return self

    @classmethod
    def parse(cls, data: Dict[str, Any]) -> "RunConfig":
        """
        :raise: ConfigError: If the document does not validate or breaks the legality matrix
        """
        data = dict(data)
        try:
            framework = F.get_enum_from_value(data.get("framework"), Framework)
        except ValueError as ex:
            raise ConfigError(f"Unknown framework: {ex}")
        # Specs are parsed on their own so family defaults apply to partial documents.
        for key in ("model_spec", "discriminator_spec"):
            if isinstance(data.get(key), dict):
                data[key] = ModelSpec.parse(data[key])
        if isinstance(data.get("loss_config"), dict):
            data["loss_config"] = LossConfig.parse(data["loss_config"])
        data["framework"] = framework
        try:
            config = cls.model_validate(data)
        except ValidationError as ex:
            raise ConfigError(f"Invalid run config: {ex}")
        return config.check()

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        if not os.path.exists(path):
            raise ConfigError(f"Run config {path} does not exist")
        try:
            with open(path, "r", encoding="utf-8") as file:
                data = json.load(file)
        except json.JSONDecodeError as ex:
            raise ConfigError(f"Run config {path} is not valid JSON: {ex}")
        config = cls.parse(data)
        if config.manifest and not os.path.isabs(config.manifest):
            config.manifest = os.path.normpath(
                os.path.join(os.path.dirname(os.path.abspath(path)), config.manifest)
            )
        logger.info(f"Loaded {config.framework.value} run config from {path}")
        return config

    def apply_components(self):
        """Merges the ``components`` overrides into the ConfigManager."""
        if self.components:
            ConfigManager().merge_overrides(self.components)

    def snapshot(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

