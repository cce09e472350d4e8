import os

import torch

from src.core.audio.records import RECORD_SUFFIX, TfCache, cache_key
from src.core.audio.stft import stft
from tests.helpers import white_noise


def _embedding(seed=0):
    return stft(white_noise(16000, seed=seed)).compress(5.55)


def test_cache_key_is_stable_and_distinct():
    assert cache_key("t1", "clean", 5.55) == cache_key("t1", "clean", 5.55)
    assert cache_key("t1", "clean", 5.55) != cache_key("t1", "noisy", 5.55)


def test_persisted_embeddings_survive_a_new_cache(tmp_path):
    tf = _embedding()
    key = cache_key("t1", "clean")
    stored = TfCache(str(tmp_path)).put(key, tf)
    loaded = TfCache(str(tmp_path)).get(key)
    assert loaded is not None
    assert loaded.plan == tf.plan
    assert torch.equal(loaded.magnitude, stored.magnitude)


def test_memory_cache_computes_once():
    cache = TfCache()
    calls = []

    def compute():
        calls.append(1)
        return _embedding(1)

    first = cache.get_or_compute("k", compute)
    second = cache.get_or_compute("k", compute)
    assert first is second
    assert len(calls) == 1
    assert len(cache) == 1


def test_unreadable_record_is_discarded(tmp_path):
    cache = TfCache(str(tmp_path))
    path = os.path.join(cache.root, f"broken{RECORD_SUFFIX}")
    with open(path, "wb") as file:
        file.write(b"garbage")
    assert cache.get("broken") is None
    assert not os.path.exists(path)
