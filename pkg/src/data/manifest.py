import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from src.core.audio.waveform import read_wav, write_wav
from src.core.constants import Split
from src.core.exceptions import DataError
from src.core.utils.functions import derive_seed
from src.core.utils.logging import ServiceLogger
from src.data.corpus import SyntheticCorpus
from src.data.mixing import TrackPair, mix_at_snr

logger = ServiceLogger(__name__)

MANIFEST_VERSION = 1


class ManifestEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    track_id: str
    clean_path: str
    noise_path: str
    snr_db: float
    split: Split
    speaker_id: str
    sentence_id: str
    noise_id: str
    transcript: Optional[str] = None
    seed: int
    noisy_path: Optional[str] = None

    @property
    def entry_id(self) -> str:
        return f"{self.track_id}_{self.snr_db:g}dB"


class Manifest:
    """
    Ordered list of mixing recipes. Stored as JSON lines: a header line with the seed, then one line
    per entry, paths relative to the manifest file.
    """

    def __init__(self, entries: List[ManifestEntry], seed: int, path: Optional[str] = None):
        self.entries = entries
        self.seed = seed
        self.path = path

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def entries_for(self, split: Split | str, snr_db: Optional[float] = None) -> List[ManifestEntry]:
        split = Split(split) if isinstance(split, str) else split
        return [
            entry
            for entry in self.entries
            if entry.split == split and (snr_db is None or entry.snr_db == snr_db)
        ]

    @property
    def snr_values(self) -> List[float]:
        return sorted({entry.snr_db for entry in self.entries})

    def check_split_hygiene(self):
        """
        :raise: DataError: If a speaker or a sentence appears in both splits
        """
        for attribute in ("speaker_id", "sentence_id"):
            train = {getattr(e, attribute) for e in self.entries_for(Split.TRAIN)}
            test = {getattr(e, attribute) for e in self.entries_for(Split.TEST)}
            shared = train & test
            if shared:
                raise DataError(
                    f"Train and test share {attribute} values {sorted(shared)[:5]}"
                )

    def save(self, path: str):
        base = os.path.dirname(os.path.abspath(path))
        os.makedirs(base, exist_ok=True)
        with open(path, "w", encoding="utf-8") as file:
            file.write(json.dumps({"version": MANIFEST_VERSION, "seed": self.seed}) + "\n")
            for entry in self.entries:
                record = entry.model_dump(mode="json")
                for key in ("clean_path", "noise_path", "noisy_path"):
                    if record[key]:
                        record[key] = os.path.relpath(os.path.abspath(record[key]), base)
                file.write(json.dumps(record, sort_keys=True) + "\n")
        self.path = path
        logger.info(f"Wrote manifest with {len(self.entries)} entries to {path}")

    @classmethod
    def load(cls, path: str) -> "Manifest":
        """
        :raise: DataError: If the file is missing, malformed or mixes speakers across splits
        """
        if not os.path.exists(path):
            raise DataError(f"Manifest {path} does not exist")
        base = os.path.dirname(os.path.abspath(path))
        with open(path, "r", encoding="utf-8") as file:
            lines = [line for line in file if line.strip()]
        try:
            header = json.loads(lines[0])
            if header.get("version") != MANIFEST_VERSION:
                raise DataError(f"{path} is not a version {MANIFEST_VERSION} manifest")
            entries = []
            for line in lines[1:]:
                record = json.loads(line)
                for key in ("clean_path", "noise_path", "noisy_path"):
                    if record.get(key):
                        record[key] = os.path.normpath(os.path.join(base, record[key]))
                entries.append(ManifestEntry.model_validate(record))
        except (IndexError, json.JSONDecodeError, ValidationError) as ex:
            raise DataError(f"Malformed manifest {path}: {ex}")
        manifest = cls(entries, header["seed"], path)
        manifest.check_split_hygiene()
        return manifest


def build_manifest(corpus: SyntheticCorpus, snr_list: Iterable[float], seed: int) -> Manifest:
    """
    One entry per (clean track, SNR); the noise recording of the track's split is drawn with a seed
    derived from the entry, so the manifest does not depend on iteration order elsewhere.
    """
    entries = []
    snr_list = list(snr_list)
    for clean in corpus.clean:
        noises = corpus.noise_for(clean.split)
        if not noises:
            raise DataError(f"No noise recordings for split {clean.split.value}")
        for snr_db in snr_list:
            choice = np.random.default_rng(derive_seed(seed, "noise", clean.track_id, snr_db))
            noise = noises[int(choice.integers(0, len(noises)))]
            entries.append(
                ManifestEntry(
                    track_id=clean.track_id,
                    clean_path=clean.path,
                    noise_path=noise.path,
                    snr_db=float(snr_db),
                    split=clean.split,
                    speaker_id=clean.speaker_id,
                    sentence_id=clean.sentence_id,
                    noise_id=noise.noise_id,
                    transcript=clean.transcript,
                    seed=derive_seed(seed, "mix", clean.track_id, snr_db),
                )
            )
    manifest = Manifest(entries, seed)
    manifest.check_split_hygiene()
    return manifest


def load_pair(entry: ManifestEntry) -> TrackPair:
    """Mixes one entry; identical entries always give identical pairs."""
    return mix_at_snr(
        read_wav(entry.clean_path),
        read_wav(entry.noise_path),
        entry.snr_db,
        entry.seed,
        noise_id=entry.noise_id,
        speaker_id=entry.speaker_id,
        sentence_id=entry.sentence_id,
        track_id=entry.entry_id,
        transcript=entry.transcript,
    )


def load_pairs(entries: List[ManifestEntry], workers: int = 1) -> List[TrackPair]:
    """Loads entries in manifest order, in parallel when ``workers`` > 1."""
    if workers <= 1:
        return [load_pair(entry) for entry in entries]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(load_pair, entries))


def write_mixtures(manifest: Manifest, root: str, workers: int = 1) -> Manifest:
    """Writes every noisy mixture as a WAV file under ``root/mixtures/<split>/`` and records it."""
    pairs = load_pairs(manifest.entries, workers)
    for entry, pair in zip(manifest.entries, pairs):
        directory = os.path.join(root, "mixtures", entry.split.value)
        os.makedirs(directory, exist_ok=True)
        entry.noisy_path = os.path.join(directory, f"{entry.entry_id}.wav")
        write_wav(entry.noisy_path, pair.noisy)
    logger.info(f"Wrote {len(pairs)} mixtures under {root}")
    return manifest
