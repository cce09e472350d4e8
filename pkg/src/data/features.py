from dataclasses import dataclass
from typing import List, Optional

import torch

from src.core.audio.records import TfCache, cache_key
from src.core.audio.stft import StftPlan, TfRepresentation, plan_stft, stft
from src.data.mixing import TrackPair


@dataclass
class TfPair:
    """Compressed clean and noisy magnitude embeddings of one pair, with the noisy phase."""

    pair: TrackPair
    clean: TfRepresentation
    noisy: TfRepresentation

    @property
    def plan(self) -> StftPlan:
        return self.noisy.plan

    @property
    def noisy_phase(self) -> torch.Tensor:
        return self.noisy.phase


def tf_pair(pair: TrackPair, scale: float, cache: Optional[TfCache] = None) -> TfPair:
    plan = plan_stft(pair.n)

    def embed(role: str, waveform):
        compute = lambda: stft(waveform, plan).compress(scale)  # noqa: E731
        if cache is None:
            return compute()
        return cache.get_or_compute(cache_key(pair.track_id, role, scale), compute)

    return TfPair(pair, embed("clean", pair.clean), embed("noisy", pair.noisy))


@dataclass
class TfBatch:
    """[B, 1, 256, 256] compressed embeddings, [B, 256, 256] noisy phase, [B, n] clean samples."""

    clean_tf: torch.Tensor
    noisy_tf: torch.Tensor
    noisy_phase: torch.Tensor
    clean_time: torch.Tensor
    plan: StftPlan
    items: List[TfPair]


def stack_tf(items: List[TfPair]) -> TfBatch:
    """Stacks items sharing one plan (equal lengths)."""
    plan = items[0].plan
    return TfBatch(
        clean_tf=torch.stack([item.clean.magnitude for item in items]).unsqueeze(1),
        noisy_tf=torch.stack([item.noisy.magnitude for item in items]).unsqueeze(1),
        noisy_phase=torch.stack([item.noisy_phase for item in items]),
        clean_time=torch.stack([item.pair.clean.samples for item in items]),
        plan=plan,
        items=items,
    )


def group_by_plan(items: List[TfPair], max_batch: int) -> List[TfBatch]:
    """Batches items of equal length together, keeping first-seen order."""
    groups = {}
    for item in items:
        groups.setdefault(item.pair.n, []).append(item)
    batches = []
    for group in groups.values():
        for start in range(0, len(group), max_batch):
            batches.append(stack_tf(group[start : start + max_batch]))
    return batches
