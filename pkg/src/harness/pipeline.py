"""
Run-directory level steps behind the command line: build the mixtures, enhance the test split with a
trained run and score the enhanced tracks.
"""

import json
import os
from collections import defaultdict
from typing import Dict, List, Optional, Sequence

from src.core.audio.waveform import read_wav, write_wav
from src.core.constants import Framework, Split
from src.core.exceptions import ConfigError, DataError
from src.core.utils.logging import ServiceLogger
from src.data.corpus import build_corpus
from src.data.manifest import Manifest, ManifestEntry, build_manifest, load_pairs, write_mixtures
from src.harness.config import RunConfig
from src.harness.enhancer import Enhancer
from src.harness.evaluator import Evaluator
from src.harness.records import (
    CONFIG_FILE,
    ENHANCED_DIR,
    ENHANCED_INDEX,
    RECORD_FILE,
    RunRecord,
    snr_key,
)
from src.metrics.asr.client import AsrClient
from src.metrics.pesq import PesqScorer

logger = ServiceLogger(__name__)

MANIFEST_FILE = "manifest.jsonl"
NOISY_MODEL = "noisy"


def mix(output_dir: str, seed: int, snr_list: Sequence[float], workers: int = 1) -> Manifest:
    """Synthesizes the corpus under ``output_dir``, mixes every track and saves the manifest."""
    corpus = build_corpus(output_dir, seed)
    manifest = write_mixtures(build_manifest(corpus, snr_list, seed), output_dir, workers)
    manifest.save(os.path.join(output_dir, MANIFEST_FILE))
    return manifest


def load_run_config(run_dir: str) -> RunConfig:
    path = os.path.join(run_dir, CONFIG_FILE)
    if not os.path.exists(path):
        raise DataError(f"{run_dir} is not a run directory, {CONFIG_FILE} is missing")
    with open(path, "r", encoding="utf-8") as file:
        return RunConfig.parse(json.load(file))


def _manifest(cfg: RunConfig, manifest_path: Optional[str]) -> Manifest:
    path = manifest_path or cfg.manifest
    if not path:
        raise ConfigError(f"Run {cfg.name} names no manifest; pass one explicitly")
    return Manifest.load(path)


def evaluation_entries(manifest: Manifest, snr_list: Sequence[float]) -> List[ManifestEntry]:
    entries = [entry for entry in manifest.entries_for(Split.TEST) if entry.snr_db in snr_list]
    if not entries:
        raise DataError(f"No test entries at SNRs {list(snr_list)}")
    return entries


def enhance_run(
    run_dir: str,
    manifest_path: Optional[str] = None,
    checkpoint: Optional[str] = None,
    workers: int = 1,
) -> List[Dict]:
    """
    Enhances the test split at the run's SNRs and writes enhanced/<entry>.wav plus
    enhanced/index.jsonl. The checkpoint defaults to the latest one of the run.

    :returns: The index lines
    """
    cfg = load_run_config(run_dir)
    cfg.apply_components()
    manifest = _manifest(cfg, manifest_path)
    if cfg.framework == Framework.WIENER:
        enhancer = Enhancer(Framework.WIENER)
    else:
        if checkpoint is None:
            latest = RunRecord.load(run_dir).latest_checkpoint
            if latest is None:
                raise DataError(f"Run {run_dir} has no checkpoint")
            checkpoint = os.path.join(run_dir, latest)
        enhancer = Enhancer.from_path(checkpoint, cfg.framework)

    entries = evaluation_entries(manifest, cfg.snr_list)
    pairs = load_pairs(entries, workers)
    enhanced = enhancer.enhance_batch([pair.noisy for pair in pairs])
    directory = os.path.join(run_dir, ENHANCED_DIR)
    os.makedirs(directory, exist_ok=True)
    index = []
    for entry, track in zip(entries, enhanced):
        name = f"{entry.entry_id}.wav"
        write_wav(os.path.join(directory, name), track)
        index.append({"entry_id": entry.entry_id, "snr_db": entry.snr_db, "path": name})
    with open(os.path.join(directory, ENHANCED_INDEX), "w", encoding="utf-8") as file:
        for line in index:
            file.write(json.dumps(line, sort_keys=True) + "\n")
    logger.info(f"Wrote {len(index)} enhanced tracks to {directory}")
    return index


def _read_index(run_dir: str) -> List[Dict]:
    path = os.path.join(run_dir, ENHANCED_DIR, ENHANCED_INDEX)
    if not os.path.exists(path):
        raise DataError(f"No enhanced tracks in {run_dir}; run enhance first")
    with open(path, "r", encoding="utf-8") as file:
        return [json.loads(line) for line in file if line.strip()]


def evaluate_run(
    run_dir: str,
    manifest_path: Optional[str] = None,
    asr_client: Optional[AsrClient] = None,
    pesq_scorer: Optional[PesqScorer] = None,
    workers: int = 1,
) -> RunRecord:
    """Scores the enhanced tracks of a run per SNR and stores the reports in its record."""
    cfg = load_run_config(run_dir)
    cfg.apply_components()
    manifest = _manifest(cfg, manifest_path)
    entries = {entry.entry_id: entry for entry in manifest.entries_for(Split.TEST)}
    grouped = defaultdict(list)
    for line in _read_index(run_dir):
        if line["entry_id"] not in entries:
            raise DataError(f"Enhanced track {line['entry_id']} is not in the manifest")
        grouped[snr_key(line["snr_db"])].append(line)

    if os.path.exists(os.path.join(run_dir, RECORD_FILE)):
        record = RunRecord.load(run_dir)
    else:
        record = RunRecord(
            name=cfg.name, framework=cfg.framework.value, seed=cfg.seed, config=cfg.snapshot()
        )
    evaluator = Evaluator(asr_client, pesq_scorer, workers)
    for key in sorted(grouped, key=float):
        lines = grouped[key]
        references = load_pairs([entries[line["entry_id"]] for line in lines], workers)
        enhanced = [read_wav(os.path.join(run_dir, ENHANCED_DIR, line["path"])) for line in lines]
        logger.info(f"Evaluating {cfg.name} at {key} dB")
        record.set_reports(float(key), evaluator.evaluate(enhanced, references).reports)
    record.save(run_dir)
    return record


def evaluate_noisy(
    manifest_path: str,
    run_dir: str,
    snr_list: Sequence[float],
    asr_client: Optional[AsrClient] = None,
    pesq_scorer: Optional[PesqScorer] = None,
    workers: int = 1,
) -> RunRecord:
    """Scores the unprocessed mixtures, stored as the ``noisy`` model."""
    manifest = Manifest.load(manifest_path)
    record = RunRecord(name=NOISY_MODEL, framework=NOISY_MODEL, seed=manifest.seed)
    evaluator = Evaluator(asr_client, pesq_scorer, workers)
    for snr in sorted(set(float(value) for value in snr_list)):
        pairs = load_pairs(evaluation_entries(manifest, [snr]), workers)
        logger.info(f"Evaluating unprocessed mixtures at {snr:g} dB")
        record.set_reports(snr, evaluator.evaluate([pair.noisy for pair in pairs], pairs).reports)
    record.save(run_dir)
    return record
