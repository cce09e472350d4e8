import torch

from src.core.audio.records import TfCache
from src.core.audio.waveform import Waveform
from src.core.constants import SegmentPolicy
from src.data.batching import batch_variable, segment_fixed, stack_pairs
from src.data.features import group_by_plan, tf_pair
from src.data.mixing import TrackPair
from tests.helpers import white_noise


def _pair(n: int, track_id: str = "", seed: int = 0) -> TrackPair:
    clean = white_noise(n, seed=seed)
    noisy = Waveform(clean.samples + white_noise(n, seed=seed + 100).samples)
    return TrackPair(clean, noisy, 0.0, "white", "tr00", f"s{n}", track_id=track_id)


def test_segments_of_an_exact_multiple():
    pair = _pair(32000)
    segments = segment_fixed(pair, 16000)
    assert len(segments) == 2
    assert torch.equal(segments[1].clean.samples, pair.clean.samples[16000:])
    assert [segment.track_id for segment in segments] == [
        f"{pair.track_id}#0",
        f"{pair.track_id}#1",
    ]


def test_remainder_policies():
    pair = _pair(16001)
    assert len(segment_fixed(pair, 16000, SegmentPolicy.DROP)) == 1
    padded = segment_fixed(pair, 16000, "pad")
    assert len(padded) == 2
    last = padded[1].noisy.samples
    assert last.shape[0] == 16000
    assert float(last[0]) == float(pair.noisy.samples[16000])
    assert torch.count_nonzero(last[1:]) == 0


def test_short_track_is_padded_to_one_segment():
    segments = segment_fixed(_pair(9000), 16000)
    assert len(segments) == 1
    assert segments[0].n == 16000
    assert segment_fixed(_pair(9000), 16000, "drop") == []


def test_variable_batches_carry_masks():
    pairs = [_pair(100, seed=1), _pair(250, seed=2), _pair(180, seed=3)]
    batch = stack_pairs(pairs)
    assert tuple(batch.clean.shape) == (3, 250)
    assert batch.lengths == [100, 250, 180]
    assert batch.mask.sum(dim=1).tolist() == [100, 250, 180]
    assert batch.padded
    assert torch.count_nonzero(batch.noisy[0, 100:]) == 0

    batches = batch_variable(pairs, max_batch=2)
    assert [len(b.pairs) for b in batches] == [2, 1]
    assert not batches[1].padded


def test_tf_pairs_group_by_length(tmp_path):
    cache = TfCache(str(tmp_path))
    items = [
        tf_pair(_pair(16000, f"a{index}", seed=index), 5.55, cache) for index in range(3)
    ] + [tf_pair(_pair(20000, "b0", seed=7), 5.55, cache)]
    batches = group_by_plan(items, max_batch=2)
    assert [len(batch.items) for batch in batches] == [2, 1, 1]
    first = batches[0]
    assert tuple(first.clean_tf.shape) == (2, 1, 256, 256)
    assert tuple(first.noisy_phase.shape) == (2, 256, 256)
    assert tuple(first.clean_time.shape) == (2, 16000)
    assert batches[2].plan.original_length == 20000


def test_tf_pair_is_cached(tmp_path):
    pair = _pair(16000, "cached")
    first = tf_pair(pair, 5.55, TfCache(str(tmp_path)))
    second = tf_pair(pair, 5.55, TfCache(str(tmp_path)))
    assert torch.allclose(first.noisy.magnitude, second.noisy.magnitude)
    uncached = tf_pair(pair, 5.55).clean.magnitude
    assert torch.allclose(first.clean.magnitude.double(), uncached, atol=1e-6)
