"""
Synthetic tone-vocabulary corpus.

Every word of a small vocabulary is voiced as a harmonic complex at a word-specific fundamental,
so sentences carry a transcript that the bundled recognizer can decode. Speakers differ in level,
pitch, harmonic roll-off and tempo. Train and test splits use disjoint speakers and sentences.
"""

import os
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.signal.windows import tukey

from src.core.audio.waveform import Waveform, write_wav
from src.core.config.manager import ConfigManager
from src.core.constants import SAMPLE_RATE, ConfigNames, Split
from src.core.exceptions import ConfigError
from src.core.utils.functions import derive_seed
from src.core.utils.logging import ServiceLogger

logger = ServiceLogger(__name__)

MAX_HARMONIC_FREQUENCY = 7000.0
PEAK_LEVEL = 0.5


class CorpusConfig(BaseModel):
    model_config = ConfigDict(extra="ignore")

    vocabulary: Dict[str, float]
    n_train_speakers: int = 6
    n_test_speakers: int = 4
    n_train_sentences: int = 30
    n_test_sentences: int = 10
    sentences_per_speaker: int = 5
    words_per_sentence: Tuple[int, int] = (3, 6)
    word_seconds: Tuple[float, float] = (0.22, 0.32)
    pause_seconds: Tuple[float, float] = (0.08, 0.14)
    lead_seconds: float = 0.18
    tail_seconds: float = 0.12
    n_harmonics: int = 12
    noise_seconds: float = 12.0
    noise_types: List[str] = ["white", "pink", "babble", "hum"]
    test_noise_types: List[str] = ["white", "babble"]

    @classmethod
    def from_config(cls, config_client: ConfigManager = None) -> "CorpusConfig":
        config = cls(**(config_client or ConfigManager()).require_config(ConfigNames.CORPUS))
        unknown = set(config.noise_types + config.test_noise_types) - set(NOISE_GENERATORS)
        if unknown:
            raise ConfigError(f"Unknown noise types {sorted(unknown)}")
        if config.sentences_per_speaker > min(config.n_train_sentences, config.n_test_sentences):
            raise ConfigError("sentences_per_speaker exceeds a sentence pool")
        return config


@dataclass(frozen=True)
class Speaker:
    speaker_id: str
    level: float
    pitch_factor: float
    rolloff: float
    tempo: float

    @classmethod
    def sample(cls, speaker_id: str, seed: int) -> "Speaker":
        rng = np.random.default_rng(derive_seed(seed, "speaker", speaker_id))
        return cls(
            speaker_id=speaker_id,
            level=float(rng.uniform(0.5, 1.0)),
            pitch_factor=float(rng.uniform(0.97, 1.03)),
            rolloff=float(rng.uniform(0.7, 1.3)),
            tempo=float(rng.uniform(0.9, 1.1)),
        )


@dataclass(frozen=True)
class Sentence:
    sentence_id: str
    words: Tuple[str, ...]

    @property
    def transcript(self) -> str:
        return " ".join(self.words)


@dataclass(frozen=True)
class CorpusEntry:
    track_id: str
    path: str
    split: Split
    speaker_id: str
    sentence_id: str
    transcript: str


@dataclass(frozen=True)
class NoiseEntry:
    noise_id: str
    path: str
    split: Split
    kind: str


def harmonic_tone(
    f0: float,
    n: int,
    rolloff: float,
    n_harmonics: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Harmonic complex with a slight vibrato, harmonics above 7 kHz left out."""
    t = np.arange(n) / SAMPLE_RATE
    frequency = f0 * (1.0 + 0.01 * np.sin(2 * np.pi * 5.0 * t))
    phase = 2 * np.pi * np.cumsum(frequency) / SAMPLE_RATE
    tone = np.zeros(n)
    for h in range(1, n_harmonics + 1):
        if h * f0 >= MAX_HARMONIC_FREQUENCY:
            break
        tone += h ** (-rolloff) * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
    return tone


def synthesize_word(
    f0: float, seconds: float, rolloff: float, n_harmonics: int, rng: np.random.Generator
) -> np.ndarray:
    n = int(round(seconds * SAMPLE_RATE))
    t = np.arange(n) / SAMPLE_RATE
    envelope = tukey(n, 0.3) * (1.0 + 0.3 * np.sin(2 * np.pi * 4.0 * t))
    word = harmonic_tone(f0, n, rolloff, n_harmonics, rng) * envelope
    return word / np.max(np.abs(word))


def synthesize_sentence(
    sentence: Sentence, speaker: Speaker, config: CorpusConfig, seed: int
) -> Waveform:
    """Leading silence, the words separated by pauses, trailing silence."""
    rng = np.random.default_rng(
        derive_seed(seed, "sentence", speaker.speaker_id, sentence.sentence_id)
    )
    pieces = [np.zeros(int(config.lead_seconds * SAMPLE_RATE))]
    for index, word in enumerate(sentence.words):
        if index:
            pause = rng.uniform(*config.pause_seconds) * speaker.tempo
            pieces.append(np.zeros(int(pause * SAMPLE_RATE)))
        seconds = rng.uniform(*config.word_seconds) * speaker.tempo
        f0 = config.vocabulary[word] * speaker.pitch_factor
        pieces.append(synthesize_word(f0, seconds, speaker.rolloff, config.n_harmonics, rng))
    pieces.append(np.zeros(int(config.tail_seconds * SAMPLE_RATE)))
    samples = np.concatenate(pieces)
    return Waveform.from_numpy(PEAK_LEVEL * speaker.level * samples)


def _white(n: int, rng: np.random.Generator, config: CorpusConfig) -> np.ndarray:
    return rng.standard_normal(n)


def _pink(n: int, rng: np.random.Generator, config: CorpusConfig) -> np.ndarray:
    spectrum = np.fft.rfft(rng.standard_normal(n))
    bins = np.arange(spectrum.size)
    spectrum /= np.sqrt(np.maximum(bins, 1))
    return np.fft.irfft(spectrum, n)


def _babble(n: int, rng: np.random.Generator, config: CorpusConfig) -> np.ndarray:
    babble = np.zeros(n)
    for _ in range(6):
        talker = np.zeros(n)
        position = int(rng.integers(0, SAMPLE_RATE // 4))
        while position < n:
            seconds = rng.uniform(*config.word_seconds)
            word = synthesize_word(
                rng.uniform(90.0, 400.0), seconds, rng.uniform(0.7, 1.3), config.n_harmonics, rng
            )
            end = min(n, position + word.size)
            talker[position:end] += word[: end - position]
            position = end + int(rng.uniform(*config.pause_seconds) * SAMPLE_RATE)
        babble += talker
    return babble


def _hum(n: int, rng: np.random.Generator, config: CorpusConfig) -> np.ndarray:
    t = np.arange(n) / SAMPLE_RATE
    hum = sum(
        np.sin(2 * np.pi * 50.0 * h * t + rng.uniform(0, 2 * np.pi)) / h for h in range(1, 20)
    )
    return hum + 0.05 * rng.standard_normal(n)


NOISE_GENERATORS = {
    "white": _white,
    "pink": _pink,
    "babble": _babble,
    "hum": _hum,
}


def synthesize_noise(kind: str, seconds: float, seed: int, config: CorpusConfig) -> Waveform:
    rng = np.random.default_rng(derive_seed(seed, "noise", kind))
    noise = NOISE_GENERATORS[kind](int(seconds * SAMPLE_RATE), rng, config)
    return Waveform.from_numpy(PEAK_LEVEL * noise / np.max(np.abs(noise)))


def make_sentences(config: CorpusConfig, seed: int) -> Dict[Split, List[Sentence]]:
    """Distinct random word sequences, the first pool for training and the rest for testing."""
    rng = np.random.default_rng(derive_seed(seed, "sentences"))
    words = sorted(config.vocabulary)
    total = config.n_train_sentences + config.n_test_sentences
    seen, sequences = set(), []
    low, high = config.words_per_sentence
    while len(sequences) < total:
        length = int(rng.integers(low, high + 1))
        sequence = tuple(words[i] for i in rng.integers(0, len(words), size=length))
        if sequence not in seen:
            seen.add(sequence)
            sequences.append(sequence)
    return {
        Split.TRAIN: [
            Sentence(f"s{index:03d}", sequence)
            for index, sequence in enumerate(sequences[: config.n_train_sentences])
        ],
        Split.TEST: [
            Sentence(f"s{index:03d}", sequence)
            for index, sequence in enumerate(
                sequences[config.n_train_sentences :], start=config.n_train_sentences
            )
        ],
    }


@dataclass
class SyntheticCorpus:
    clean: List[CorpusEntry]
    noise: List[NoiseEntry]

    def clean_for(self, split: Split) -> List[CorpusEntry]:
        return [entry for entry in self.clean if entry.split == split]

    def noise_for(self, split: Split) -> List[NoiseEntry]:
        return [entry for entry in self.noise if entry.split == split]


def build_corpus(root: str, seed: int, config: CorpusConfig = None) -> SyntheticCorpus:
    """
    Writes the clean sentences and the noise recordings of both splits under ``root`` and lists them.
    Output is a pure function of (config, seed).
    """
    config = config or CorpusConfig.from_config()
    sentences = make_sentences(config, seed)
    speakers = {
        Split.TRAIN: [f"tr{index:02d}" for index in range(config.n_train_speakers)],
        Split.TEST: [f"te{index:02d}" for index in range(config.n_test_speakers)],
    }
    clean, noise = [], []
    for split in (Split.TRAIN, Split.TEST):
        directory = os.path.join(root, "clean", split.value)
        os.makedirs(directory, exist_ok=True)
        pool = sentences[split]
        for speaker_index, speaker_id in enumerate(speakers[split]):
            speaker = Speaker.sample(speaker_id, seed)
            for offset in range(config.sentences_per_speaker):
                sentence = pool[
                    (speaker_index * config.sentences_per_speaker + offset) % len(pool)
                ]
                track_id = f"{speaker_id}_{sentence.sentence_id}"
                path = os.path.join(directory, f"{track_id}.wav")
                write_wav(path, synthesize_sentence(sentence, speaker, config, seed))
                clean.append(
                    CorpusEntry(
                        track_id,
                        path,
                        split,
                        speaker_id,
                        sentence.sentence_id,
                        sentence.transcript,
                    )
                )

        noise_directory = os.path.join(root, "noise")
        os.makedirs(noise_directory, exist_ok=True)
        kinds = config.noise_types if split == Split.TRAIN else config.test_noise_types
        for kind in kinds:
            noise_id = f"{split.value}_{kind}"
            path = os.path.join(noise_directory, f"{noise_id}.wav")
            write_wav(
                path,
                synthesize_noise(kind, config.noise_seconds, derive_seed(seed, split.value), config),
            )
            noise.append(NoiseEntry(noise_id, path, split, kind))

    logger.info(
        f"Synthetic corpus under {root}: {len(clean)} clean tracks, {len(noise)} noise recordings"
    )
    return SyntheticCorpus(clean, noise)
