from dataclasses import dataclass
from typing import List

import torch
import torch.nn.functional as F

import src.core.utils.functions as functions
from src.core.audio.waveform import Waveform
from src.core.constants import FIXED_SEGMENT_LENGTH, SegmentPolicy
from src.data.mixing import TrackPair


def _window(waveform: Waveform, start: int, length: int) -> Waveform:
    samples = waveform.samples[start : start + length]
    if samples.shape[0] < length:
        samples = F.pad(samples, (0, length - samples.shape[0]))
    return Waveform(samples)


def segment_fixed(
    pair: TrackPair,
    length: int = FIXED_SEGMENT_LENGTH,
    policy: SegmentPolicy | str = SegmentPolicy.PAD,
) -> List[TrackPair]:
    """
    Cuts a pair into consecutive non-overlapping windows of ``length`` samples. A shorter final
    remainder is zero-padded (``pad``) or discarded (``drop``).
    """
    policy = functions.get_enum_from_value(policy, SegmentPolicy)
    full, remainder = divmod(pair.n, length)
    count = full + (1 if remainder and policy == SegmentPolicy.PAD else 0)
    segments = []
    for index in range(count):
        start = index * length
        segments.append(
            TrackPair(
                clean=_window(pair.clean, start, length),
                noisy=_window(pair.noisy, start, length),
                snr_db=pair.snr_db,
                noise_id=pair.noise_id,
                speaker_id=pair.speaker_id,
                sentence_id=pair.sentence_id,
                track_id=f"{pair.track_id}#{index}",
                transcript=pair.transcript,
                noise_gain=pair.noise_gain,
            )
        )
    return segments


@dataclass
class PairBatch:
    """
    Stacked pairs, [B, L] each. ``mask`` marks real samples; padded positions are False.
    """

    clean: torch.Tensor
    noisy: torch.Tensor
    mask: torch.Tensor
    pairs: List[TrackPair]

    @property
    def lengths(self) -> List[int]:
        return [pair.n for pair in self.pairs]

    @property
    def padded(self) -> bool:
        return not bool(self.mask.all())


def stack_pairs(pairs: List[TrackPair]) -> PairBatch:
    """Pads every pair to the longest one in the list and stacks them."""
    longest = max(pair.n for pair in pairs)
    clean = torch.zeros(len(pairs), longest, dtype=torch.float64)
    noisy = torch.zeros(len(pairs), longest, dtype=torch.float64)
    mask = torch.zeros(len(pairs), longest, dtype=torch.bool)
    for index, pair in enumerate(pairs):
        clean[index, : pair.n] = pair.clean.samples
        noisy[index, : pair.n] = pair.noisy.samples
        mask[index, : pair.n] = True
    return PairBatch(clean, noisy, mask, list(pairs))


def batch_variable(pairs: List[TrackPair], max_batch: int) -> List[PairBatch]:
    """Groups pairs in order into batches of at most ``max_batch``, padded with validity masks."""
    return [
        stack_pairs(pairs[start : start + max_batch])
        for start in range(0, len(pairs), max_batch)
    ]
