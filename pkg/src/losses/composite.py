from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import torch
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

import src.core.utils.functions as F
from src.core.audio.stft import (
    StftPlan,
    istft_tensor,
    magnitude_decompress,
    plan_stft,
    stft_tensor,
)
from src.core.constants import DomainBridge, Framework, LossKind
from src.core.exceptions import (
    CalibrationError,
    IllegalCombinationError,
    LossConfigError,
    MissingPhaseError,
    ShapeError,
)
from src.core.utils.logging import ServiceLogger
from src.losses.terms import (
    AdversarialMode,
    adv_loss,
    feature_loss,
    l1_tf,
    l1_time,
)
from src.models.discriminator import ConditionalDiscriminator
from src.models.provider import discriminate

logger = ServiceLogger(__name__)

ADVERSARIAL_L1_WEIGHT = 100.0


class LossTerm(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: LossKind
    weight: float = Field(default=1.0, ge=0.0)
    bridge: DomainBridge = DomainBridge.NONE


class CalibrationTarget(Enum):
    UNIT = "unit"
    BASELINE = "baseline"


class LossConfig(BaseModel):
    """
    Declarative wiring of the loss terms penalizing a generator. A term's bridge says in which domain
    it is evaluated relative to the generator output: ``stft`` takes a time-domain output into the
    TF domain, ``istft_with_noisy_phase`` takes a TF output back to a waveform using the noisy phase.
    """

    model_config = ConfigDict(extra="forbid")

    terms: List[LossTerm]
    feature_layer_weights: Optional[List[float]] = None
    adversarial_mode: AdversarialMode = AdversarialMode.LOG
    calibration_target: CalibrationTarget = CalibrationTarget.UNIT
    calibrated: bool = False
    calibration_means: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check(self):
        if not self.terms:
            raise ValueError("a loss config needs at least one term")
        kinds = [term.kind for term in self.terms]
        if len(set(kinds)) != len(kinds):
            raise ValueError(f"duplicate loss terms in {[k.value for k in kinds]}")
        if self.feature_layer_weights is not None and any(
            w < 0 for w in self.feature_layer_weights
        ):
            raise ValueError("feature layer weights must be nonnegative")
        return self

    @classmethod
    def parse(cls, data: dict) -> "LossConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as ex:
            raise LossConfigError(str(ex))

    def term(self, kind: LossKind | str) -> Optional[LossTerm]:
        kind = F.get_enum_from_value(kind, LossKind)
        return next((term for term in self.terms if term.kind == kind), None)

    def has(self, kind: LossKind | str) -> bool:
        return self.term(kind) is not None

    def weight(self, kind: LossKind | str) -> float:
        term = self.term(kind)
        return term.weight if term is not None else 0.0

    def with_weights(self, weights: Mapping[LossKind, float]) -> "LossConfig":
        terms = [
            term.model_copy(update={"weight": weights.get(term.kind, term.weight)})
            for term in self.terms
        ]
        return self.model_copy(update={"terms": terms})

    @property
    def bridged_terms(self) -> List[LossTerm]:
        return [term for term in self.terms if term.bridge != DomainBridge.NONE]

    def layer_weights(self, n_features: int) -> List[float]:
        """lambda_k, uniform 1/K unless configured."""
        if self.feature_layer_weights is None:
            return [1.0 / n_features] * n_features
        if len(self.feature_layer_weights) != n_features:
            raise LossConfigError(
                f"{len(self.feature_layer_weights)} feature weights for a discriminator with "
                f"{n_features} layers"
            )
        return list(self.feature_layer_weights)

    def check_wiring(self, generator_domain: str, has_phase: bool = True):
        """
        Checks every term can be evaluated on a ``time`` or ``tf`` generator output.

        :raise: IllegalCombinationError: On a bridge that does not fit the generator domain
        """
        for term in self.terms:
            if term.bridge == DomainBridge.STFT and generator_domain != "time":
                raise IllegalCombinationError(
                    f"{term.kind.value} bridged by stft needs a time-domain generator"
                )
            if term.bridge == DomainBridge.ISTFT_WITH_NOISY_PHASE:
                if generator_domain != "tf":
                    raise IllegalCombinationError(
                        f"{term.kind.value} bridged by istft needs a TF-domain generator"
                    )
                if not has_phase:
                    raise MissingPhaseError(
                        f"{term.kind.value} bridged by istft needs the noisy phase"
                    )
            if term.bridge != DomainBridge.NONE and term.kind not in (
                LossKind.L1_TIME,
                LossKind.L1_TF,
            ):
                raise IllegalCombinationError(f"{term.kind.value} cannot be bridged")
            native = {LossKind.L1_TIME: "time", LossKind.L1_TF: "tf"}.get(term.kind)
            if term.bridge == DomainBridge.NONE and native and native != generator_domain:
                raise IllegalCombinationError(
                    f"{term.kind.value} on a {generator_domain} generator needs a bridge"
                )


@dataclass
class CompositeLossValue:
    """Total loss and, per term kind, the (raw, weighted) values that sum to it."""

    total: torch.Tensor
    per_term: Dict[LossKind, Tuple[torch.Tensor, torch.Tensor]] = field(default_factory=dict)

    def raw(self, kind: LossKind) -> float:
        return float(self.per_term[kind][0].detach())

    def as_record(self) -> Dict[str, float]:
        record = {"total": float(self.total.detach())}
        for kind, (raw, weighted) in self.per_term.items():
            record[f"{kind.value}_raw"] = float(raw.detach())
            record[f"{kind.value}_weighted"] = float(weighted.detach())
        return record


@dataclass
class GeneratorBatch:
    """
    Everything a generator loss may look at. Time tensors are [B, n], TF tensors [B, 1, 256, 256]
    (compressed magnitudes); ``noisy_phase`` is [B, 256, 256] and ``mask`` marks real samples of
    padded variable-length batches.
    """

    clean_time: Optional[torch.Tensor] = None
    noisy_time: Optional[torch.Tensor] = None
    enhanced_time: Optional[torch.Tensor] = None
    clean_tf: Optional[torch.Tensor] = None
    noisy_tf: Optional[torch.Tensor] = None
    enhanced_tf: Optional[torch.Tensor] = None
    noisy_phase: Optional[torch.Tensor] = None
    mask: Optional[torch.Tensor] = None
    plan: Optional[StftPlan] = None


def _magnitudes(samples: torch.Tensor, plan: StftPlan) -> torch.Tensor:
    return stft_tensor(samples, plan)[0]


def _stft_bridged_l1(batch: GeneratorBatch) -> torch.Tensor:
    clean, enhanced = batch.clean_time, batch.enhanced_time
    if batch.mask is None:
        plan = batch.plan or plan_stft(clean.shape[-1])
        return l1_tf(_magnitudes(clean, plan), _magnitudes(enhanced, plan))
    # Each item of a padded batch is transformed at its own length.
    values = []
    for item in range(clean.shape[0]):
        n = int(batch.mask[item].sum())
        plan = plan_stft(n)
        values.append(
            l1_tf(_magnitudes(clean[item, :n], plan), _magnitudes(enhanced[item, :n], plan))
        )
    return torch.stack(values).mean()


def _istft_bridged_l1(batch: GeneratorBatch, scale: Optional[float]) -> torch.Tensor:
    if batch.noisy_phase is None:
        raise MissingPhaseError("The istft bridge needs the noisy phase")
    plan = batch.plan or plan_stft(batch.clean_time.shape[-1])
    magnitude = torch.clamp(magnitude_decompress(batch.enhanced_tf, scale), min=0.0)
    magnitude = magnitude.reshape(batch.noisy_phase.shape)
    reconstructed = istft_tensor(magnitude, batch.noisy_phase, plan)
    return l1_time(batch.clean_time.reshape(reconstructed.shape), reconstructed)


def _adversarial_pair(batch: GeneratorBatch):
    if batch.enhanced_tf is not None:
        return batch.clean_tf, batch.enhanced_tf, batch.noisy_tf
    return batch.clean_time, batch.enhanced_time, batch.noisy_time


def compose_generator_loss(
    cfg: LossConfig,
    batch: GeneratorBatch,
    discriminator: Optional[ConditionalDiscriminator] = None,
    scale: Optional[float] = None,
) -> CompositeLossValue:
    """
    Evaluates every configured term on a generator batch and sums the weighted values.

    :raise: LossConfigError: If an adversarial or feature term has no discriminator
    """
    per_term = {}
    for term in cfg.terms:
        if term.kind in (LossKind.ADV, LossKind.FEATURE) and discriminator is None:
            raise LossConfigError(f"{term.kind.value} term needs a discriminator")
        if term.kind == LossKind.ADV:
            _, enhanced, condition = _adversarial_pair(batch)
            d_fake = discriminate(discriminator, enhanced, condition).probability
            raw = adv_loss(torch.ones_like(d_fake), d_fake, cfg.adversarial_mode).generator
        elif term.kind == LossKind.FEATURE:
            clean, enhanced, condition = _adversarial_pair(batch)
            raw = feature_loss(
                clean,
                enhanced,
                discriminator,
                cfg.layer_weights(discriminator.n_features),
                condition=condition,
            )
        elif term.kind == LossKind.L1_TIME:
            if term.bridge == DomainBridge.ISTFT_WITH_NOISY_PHASE:
                raw = _istft_bridged_l1(batch, scale)
            else:
                raw = l1_time(batch.clean_time, batch.enhanced_time, batch.mask)
        else:
            if term.bridge == DomainBridge.STFT:
                raw = _stft_bridged_l1(batch)
            else:
                raw = l1_tf(batch.clean_tf, batch.enhanced_tf)
        per_term[term.kind] = (raw, term.weight * raw)

    total = sum(weighted for _, weighted in per_term.values())
    return CompositeLossValue(total=total, per_term=per_term)


def _time_tensor(value) -> torch.Tensor:
    return value.samples if hasattr(value, "samples") else value


def compose_cd_wavenet(
    x, x_hat, cfg: LossConfig, plan: Optional[StftPlan] = None
) -> CompositeLossValue:
    """
    w_t * l1_time(x, x_hat) + w_f * l1_tf(|stft(x)|, |stft(x_hat)|); differentiable in x_hat.
    """
    x, x_hat = _time_tensor(x), _time_tensor(x_hat)
    if x.shape != x_hat.shape:
        raise ShapeError(f"x {tuple(x.shape)} and x_hat {tuple(x_hat.shape)} differ")
    cfg.check_wiring("time")
    return compose_generator_loss(
        cfg, GeneratorBatch(clean_time=x, enhanced_time=x_hat, plan=plan)
    )


def compose_cd_aegan(
    x_m: torch.Tensor,
    x_hat_m: torch.Tensor,
    y_p: Optional[torch.Tensor],
    x_time,
    cfg: LossConfig,
    discriminator: Optional[ConditionalDiscriminator] = None,
    y_m: Optional[torch.Tensor] = None,
    plan: Optional[StftPlan] = None,
    scale: Optional[float] = None,
) -> CompositeLossValue:
    """
    w_adv * adv + w_fb * feature + w_tf * l1_tf(x_m, x_hat_m)
    + w_t * l1_time(x_time, istft(decompress(x_hat_m), y_p)); differentiable in x_hat_m through
    the ISTFT bridge. ``y_m`` is the noisy embedding the discriminator is conditioned on.

    :raise: MissingPhaseError: If the istft bridge is configured and y_p is None
    """
    if x_m.shape != x_hat_m.shape:
        raise ShapeError(f"x_m {tuple(x_m.shape)} and x_hat_m {tuple(x_hat_m.shape)} differ")
    cfg.check_wiring("tf", has_phase=y_p is not None)
    return compose_generator_loss(
        cfg,
        GeneratorBatch(
            clean_time=_time_tensor(x_time),
            clean_tf=x_m,
            enhanced_tf=x_hat_m,
            noisy_tf=y_m,
            noisy_phase=y_p,
            plan=plan,
        ),
        discriminator=discriminator,
        scale=scale,
    )


def calibrate_equal_importance(
    cfg: LossConfig,
    calibration: Union[Mapping, Iterable[CompositeLossValue]],
) -> LossConfig:
    """
    Weights the two domain terms of a cross-domain config so they contribute equally on the
    calibration batch. With the ``unit`` target each weight becomes 1 / mean raw value; with
    ``baseline`` the unbridged term keeps its weighted mean and the bridged term is matched to it.

    :param cfg: Loss config with one bridged and one unbridged L1 term
    :param calibration: raw term means by kind, or the loss values of the calibration batch items

    :returns: LossConfig: a copy with the weights set and the means recorded
    :raise: CalibrationError: If a calibrated term has a zero mean on the calibration batch
    """
    if isinstance(calibration, Mapping):
        means = {F.get_enum_from_value(k, LossKind): float(v) for k, v in calibration.items()}
    else:
        values = list(calibration)
        if not values:
            raise CalibrationError("Empty calibration batch")
        means = {
            kind: sum(value.raw(kind) for value in values) / len(values)
            for kind in values[0].per_term
        }

    bridged = cfg.bridged_terms
    if not bridged:
        logger.info("No cross-domain term to calibrate")
        return cfg
    kinds = [LossKind.L1_TIME, LossKind.L1_TF]
    for kind in kinds:
        if kind not in means:
            raise CalibrationError(f"No calibration value for {kind.value}")
        if not means[kind] > 0:
            raise CalibrationError(
                f"{kind.value} is zero on the calibration batch; cannot equalize it"
            )

    if cfg.calibration_target == CalibrationTarget.BASELINE:
        bridged_kind = bridged[0].kind
        baseline_kind = next(k for k in kinds if k != bridged_kind)
        target = cfg.weight(baseline_kind) * means[baseline_kind]
        weights = {bridged_kind: target / means[bridged_kind]}
    else:
        weights = {kind: 1.0 / means[kind] for kind in kinds}

    logger.info(
        "Calibrated cross-domain weights: "
        + ", ".join(f"{k.value}={w:.6g}" for k, w in weights.items())
    )
    calibrated = cfg.with_weights(weights)
    return calibrated.model_copy(
        update={
            "calibrated": True,
            "calibration_means": {k.value: means[k] for k in kinds},
        }
    )


def default_loss_config(framework: Framework | str) -> Optional[LossConfig]:
    """Baseline wiring of each framework; None for the untrained Wiener baseline."""
    framework = F.get_enum_from_value(framework, Framework)
    adv = LossTerm(kind=LossKind.ADV, weight=1.0)
    feature = LossTerm(kind=LossKind.FEATURE, weight=1.0)
    terms = {
        Framework.WIENER: None,
        Framework.SEGAN: [adv, LossTerm(kind=LossKind.L1_TIME, weight=ADVERSARIAL_L1_WEIGHT)],
        Framework.WAVENET: [LossTerm(kind=LossKind.L1_TIME)],
        Framework.CD_WAVENET: [
            LossTerm(kind=LossKind.L1_TIME),
            LossTerm(kind=LossKind.L1_TF, bridge=DomainBridge.STFT),
        ],
        Framework.FSEGAN: [adv, LossTerm(kind=LossKind.L1_TF, weight=ADVERSARIAL_L1_WEIGHT)],
        Framework.AEGAN: [
            adv,
            feature,
            LossTerm(kind=LossKind.L1_TF, weight=ADVERSARIAL_L1_WEIGHT),
        ],
        Framework.CD_AEGAN: [
            adv,
            feature,
            LossTerm(kind=LossKind.L1_TF, weight=ADVERSARIAL_L1_WEIGHT),
            LossTerm(
                kind=LossKind.L1_TIME,
                weight=ADVERSARIAL_L1_WEIGHT,
                bridge=DomainBridge.ISTFT_WITH_NOISY_PHASE,
            ),
        ],
    }[framework]
    return LossConfig(terms=terms) if terms is not None else None
