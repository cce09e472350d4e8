import dataclasses
import json
import os
from typing import Dict, List, Optional

import numpy as np
import torch

from src.core.audio.records import TfCache
from src.core.audio.stft import StftConfig
from src.core.config.manager import ConfigManager
from src.core.constants import FIXED_SEGMENT_LENGTH, ConfigNames, ModelFamily, Split
from src.core.exceptions import ConfigError, DataError
from src.core.utils.functions import derive_seed, seed_everything
from src.core.utils.logging import ServiceLogger, attach_run_log, detach_run_log
from src.data.batching import PairBatch, batch_variable, segment_fixed
from src.data.features import TfBatch, group_by_plan, tf_pair
from src.data.manifest import Manifest, load_pairs
from src.data.mixing import TrackPair
from src.harness.config import Feeding, RunConfig
from src.harness.records import (
    CONFIG_FILE,
    LOSSES_FILE,
    RunRecord,
    checkpoint_path,
)
from src.losses.composite import (
    CompositeLossValue,
    GeneratorBatch,
    calibrate_equal_importance,
    compose_generator_loss,
)
from src.losses.terms import adv_loss
from src.models.checkpoint import save_checkpoint
from src.models.provider import build_model, discriminate, generate_tf, generate_time_tensor

logger = ServiceLogger(__name__)


class Trainer:
    """
    Trains one framework on the training split of a manifest.

    Adversarial frameworks alternate ``d_steps_per_g_step`` discriminator steps with one generator
    step; the Wavenet variants take plain generator steps. Cross-domain loss weights are calibrated
    on the first batch unless the loss config is already calibrated.
    """

    def __init__(
        self,
        cfg: RunConfig,
        run_dir: str,
        pairs: Optional[List[TrackPair]] = None,
    ):
        cfg.apply_components()
        self.cfg = cfg
        self.rule = cfg.rule
        self.run_dir = run_dir
        self.loss_config = cfg.loss_config
        self.scale = StftConfig.from_config().compression_scale
        self.mixing = ConfigManager().load_config(ConfigNames.MIXING) or {}
        self.step = 0
        self._pairs = pairs
        self.generator = None
        self.discriminator = None
        self.generator_optimizer = None
        self.discriminator_optimizer = None
        if cfg.model_spec is not None and cfg.model_spec.domain == "tf":
            self.cache = TfCache(os.path.join(run_dir, "cache"))
        else:
            self.cache = None

    @property
    def domain(self) -> str:
        return self.cfg.model_spec.domain

    def build(self):
        """Builds the networks and their Adam optimizers from the run seed."""
        self.generator = build_model(self.cfg.model_spec, self.cfg.seed)
        self.generator_optimizer = torch.optim.Adam(
            self.generator.parameters(),
            lr=self.cfg.learning_rate,
            betas=tuple(self.cfg.betas),
        )
        if self.rule.adversarial:
            self.discriminator = build_model(self.cfg.discriminator_spec, self.cfg.seed + 1)
            self.discriminator_optimizer = torch.optim.Adam(
                self.discriminator.parameters(),
                lr=self.cfg.learning_rate,
                betas=tuple(self.cfg.betas),
            )

    def training_pairs(self) -> List[TrackPair]:
        if self._pairs is None:
            if not self.cfg.manifest:
                raise ConfigError("The run config names no manifest")
            manifest = Manifest.load(self.cfg.manifest)
            entries = [
                entry
                for entry in manifest.entries_for(Split.TRAIN)
                if entry.snr_db in self.cfg.snr_list
            ]
            if not entries:
                raise DataError(f"No training entries at SNRs {self.cfg.snr_list}")
            self._pairs = load_pairs(entries, self.cfg.workers)
            logger.info(f"Loaded {len(self._pairs)} training pairs")
        return self._pairs

    def training_items(self, pairs: List[TrackPair]) -> list:
        """One-second segments or whole tracks, embedded when the generator works on TF input."""
        items = list(pairs)
        if self.rule.feeding == Feeding.FIXED:
            length = self.mixing.get("segment_length", FIXED_SEGMENT_LENGTH)
            if (
                self.cfg.model_spec.family == ModelFamily.UNET1D
                and self.cfg.model_spec.input_length != length
            ):
                raise ConfigError(
                    f"unet1d input length {self.cfg.model_spec.input_length} differs from the "
                    f"segment length {length}"
                )
            policy = self.mixing.get("segment_policy", "pad")
            items = [segment for pair in pairs for segment in segment_fixed(pair, length, policy)]
        if self.domain == "tf":
            items = [tf_pair(item, self.scale, self.cache) for item in items]
        return items

    def batches(self, items: list, epoch: int) -> List[GeneratorBatch]:
        """Shuffles items with a seed derived from the epoch and groups them into batches."""
        order = np.random.default_rng(derive_seed(self.cfg.seed, "epoch", epoch)).permutation(
            len(items)
        )
        items = [items[index] for index in order]
        if self.cfg.max_items_per_epoch:
            items = items[: self.cfg.max_items_per_epoch]
        if self.domain == "tf":
            return [_tf_batch(batch) for batch in group_by_plan(items, self.cfg.batch_size)]
        return [_time_batch(batch) for batch in batch_variable(items, self.cfg.batch_size)]

    def forward(self, batch: GeneratorBatch) -> GeneratorBatch:
        if self.domain == "tf":
            return dataclasses.replace(
                batch, enhanced_tf=generate_tf(self.generator, batch.noisy_tf)
            )
        enhanced = generate_time_tensor(self.generator, batch.noisy_time.unsqueeze(1))
        return dataclasses.replace(batch, enhanced_time=enhanced.squeeze(1))

    def _judged(self, batch: GeneratorBatch):
        if self.domain == "tf":
            return batch.clean_tf, batch.enhanced_tf, batch.noisy_tf
        return batch.clean_time, batch.enhanced_time, batch.noisy_time

    def discriminator_step(self, batch: GeneratorBatch) -> float:
        with torch.no_grad():
            enhanced = self.forward(batch)
        real, fake, condition = self._judged(enhanced)
        d_real = discriminate(self.discriminator, real, condition).probability
        d_fake = discriminate(self.discriminator, fake, condition).probability
        loss = adv_loss(d_real, d_fake, self.loss_config.adversarial_mode).discriminator_loss
        self.discriminator_optimizer.zero_grad()
        loss.backward()
        self.discriminator_optimizer.step()
        return float(loss.detach())

    def generator_step(self, batch: GeneratorBatch) -> CompositeLossValue:
        value = compose_generator_loss(
            self.loss_config, self.forward(batch), self.discriminator, self.scale
        )
        self.generator_optimizer.zero_grad()
        value.total.backward()
        self.generator_optimizer.step()
        return value

    def evaluate_loss(self, batch: GeneratorBatch) -> CompositeLossValue:
        with torch.no_grad():
            return compose_generator_loss(
                self.loss_config, self.forward(batch), self.discriminator, self.scale
            )

    def calibrate(self, batch: GeneratorBatch):
        if not (
            self.cfg.calibrate
            and self.loss_config.bridged_terms
            and not self.loss_config.calibrated
        ):
            return
        self.loss_config = calibrate_equal_importance(
            self.loss_config, [self.evaluate_loss(batch)]
        )

    def train_step(self, batch: GeneratorBatch) -> Dict[str, float]:
        d_loss = None
        if self.discriminator is not None:
            for _ in range(self.cfg.d_steps_per_g_step):
                d_loss = self.discriminator_step(batch)
        value = self.generator_step(batch)
        self.step += 1
        entry = value.as_record()
        if d_loss is not None:
            entry["discriminator"] = d_loss
        return entry

    def _save_checkpoint(self, epoch: int) -> str:
        path = checkpoint_path(self.run_dir, epoch)
        save_checkpoint(
            path,
            self.cfg.framework,
            self.generator,
            seed=self.cfg.seed,
            step=self.step,
            epoch=epoch,
            discriminator=self.discriminator,
            compression_scale=self.scale,
            loss_config=self.loss_config.model_dump(mode="json"),
        )
        return os.path.relpath(path, self.run_dir)

    def train(self) -> RunRecord:
        """
        Runs every epoch, appending each step's loss breakdown to losses.jsonl and saving a
        checkpoint at the end of each epoch.
        """
        handler = attach_run_log(logger, self.run_dir)
        try:
            with open(os.path.join(self.run_dir, CONFIG_FILE), "w", encoding="utf-8") as file:
                json.dump(self.cfg.snapshot(), file, indent=2, sort_keys=True)
            record = RunRecord(
                name=self.cfg.name,
                framework=self.cfg.framework.value,
                seed=self.cfg.seed,
                config=self.cfg.snapshot(),
            )
            if not self.rule.trainable:
                logger.info(f"{self.cfg.framework.value} takes no training")
                record.save(self.run_dir)
                return record

            seed_everything(self.cfg.seed)
            self.build()
            items = self.training_items(self.training_pairs())
            logger.info(
                f"Training {self.cfg.framework.value} on {len(items)} items for "
                f"{self.cfg.epochs} epochs (seed {self.cfg.seed})"
            )
            with open(os.path.join(self.run_dir, LOSSES_FILE), "w", encoding="utf-8") as log:
                for epoch in range(1, self.cfg.epochs + 1):
                    batches = self.batches(items, epoch)
                    if epoch == 1 and batches:
                        self.calibrate(batches[0])
                    entries = []
                    for batch in batches:
                        entry = {"epoch": epoch, "step": self.step + 1, **self.train_step(batch)}
                        log.write(json.dumps(entry, sort_keys=True) + "\n")
                        entries.append(entry)
                        if self.step % self.cfg.log_every == 0:
                            logger.info(f"Step {self.step}: total {entry['total']:.6f}")
                    log.flush()
                    summary = _mean_losses(entries)
                    record.epoch_losses.append(summary)
                    record.checkpoints.append(self._save_checkpoint(epoch))
                    logger.info(
                        f"Epoch {epoch}/{self.cfg.epochs}: "
                        + ", ".join(f"{key}={value:.6f}" for key, value in summary.items())
                    )
            record.save(self.run_dir)
            return record
        finally:
            detach_run_log(logger, handler)


def _mean_losses(entries: List[Dict[str, float]]) -> Dict[str, float]:
    keys = [key for key in entries[0] if key not in ("epoch", "step")] if entries else []
    return {key: float(np.mean([entry[key] for entry in entries])) for key in keys}


def _time_batch(batch: PairBatch) -> GeneratorBatch:
    return GeneratorBatch(
        clean_time=batch.clean.float(),
        noisy_time=batch.noisy.float(),
        mask=batch.mask if batch.padded else None,
    )


def _tf_batch(batch: TfBatch) -> GeneratorBatch:
    return GeneratorBatch(
        clean_time=batch.clean_time.float(),
        clean_tf=batch.clean_tf.float(),
        noisy_tf=batch.noisy_tf.float(),
        noisy_phase=batch.noisy_phase.float(),
        plan=batch.plan,
    )


def train(cfg: RunConfig, run_dir: str, pairs: Optional[List[TrackPair]] = None) -> RunRecord:
    return Trainer(cfg, run_dir, pairs).train()
