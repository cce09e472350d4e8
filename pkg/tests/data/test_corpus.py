import json
import os

import numpy as np
import pytest

from src.core.audio.waveform import read_wav
from src.core.constants import ConfigNames, Split
from src.core.exceptions import ConfigError, DataError
from src.data.corpus import CorpusConfig, build_corpus, make_sentences
from src.data.manifest import Manifest, build_manifest, load_pair, load_pairs
from src.data.mixing import measured_snr
from tests.conftest import SMALL_CORPUS


@pytest.fixture
def small_config(config_manager) -> CorpusConfig:
    config_manager.save_config(ConfigNames.CORPUS, SMALL_CORPUS)
    return CorpusConfig.from_config()


def test_sentence_pools_are_disjoint(small_config):
    sentences = make_sentences(small_config, seed=3)
    train = {s.words for s in sentences[Split.TRAIN]}
    test = {s.words for s in sentences[Split.TEST]}
    assert len(train) == 4 and len(test) == 2
    assert not train & test
    for sentence in sentences[Split.TEST]:
        assert 3 <= len(sentence.words) <= 4
        assert set(sentence.words) <= set(small_config.vocabulary)


def test_corpus_is_a_function_of_the_seed(small_config, tmp_path):
    first = build_corpus(str(tmp_path / "a"), 5, small_config)
    second = build_corpus(str(tmp_path / "b"), 5, small_config)
    assert [e.track_id for e in first.clean] == [e.track_id for e in second.clean]
    for a, b in zip(first.clean, second.clean):
        assert np.array_equal(read_wav(a.path).numpy(), read_wav(b.path).numpy())
        assert a.transcript == b.transcript
    assert len(first.clean_for(Split.TRAIN)) == 4
    assert len(first.noise_for(Split.TEST)) == len(small_config.test_noise_types)


def test_unknown_noise_types_are_rejected(config_manager):
    config_manager.save_config(ConfigNames.CORPUS, {"noise_types": ["white", "traffic"]})
    with pytest.raises(ConfigError):
        CorpusConfig.from_config()


def test_manifest_of_the_mixed_corpus(manifest_path):
    manifest = Manifest.load(manifest_path)
    assert manifest.seed == 0
    assert len(manifest) == 16
    assert manifest.snr_values == [0.0, 5.0]
    assert len(manifest.entries_for(Split.TEST, 5.0)) == 4
    assert len(manifest.entries_for("train")) == 8
    for entry in manifest.entries_for(Split.TEST):
        assert entry.noise_id.startswith("test_")
        assert os.path.exists(entry.noisy_path)


def test_manifest_paths_are_relative_on_disk(manifest_path):
    with open(manifest_path, "r", encoding="utf-8") as file:
        lines = [json.loads(line) for line in file]
    assert lines[0] == {"version": 1, "seed": 0}
    assert all(not os.path.isabs(line["clean_path"]) for line in lines[1:])


def test_loaded_pairs_hit_their_snr(manifest_path):
    manifest = Manifest.load(manifest_path)
    entries = manifest.entries_for(Split.TEST)
    pairs = load_pairs(entries, workers=2)
    for entry, pair in zip(entries, pairs):
        assert pair.track_id == entry.entry_id
        assert pair.transcript == entry.transcript
        assert measured_snr(pair) == pytest.approx(entry.snr_db, abs=0.01)
    again = load_pair(entries[0])
    assert np.array_equal(again.noisy.numpy(), pairs[0].noisy.numpy())


def test_written_mixtures_match_the_recipes(manifest_path):
    entry = Manifest.load(manifest_path).entries_for(Split.TEST)[0]
    stored = read_wav(entry.noisy_path).numpy()
    assert np.max(np.abs(stored - np.clip(load_pair(entry).noisy.numpy(), -1, 1))) <= 2 / 32768


def test_split_hygiene(manifest_path, tmp_path):
    manifest = Manifest.load(manifest_path)
    manifest.check_split_hygiene()
    leaked = manifest.entries_for(Split.TEST)[0].model_copy(update={"speaker_id": "tr00"})
    with pytest.raises(DataError):
        Manifest(manifest.entries + [leaked], 0).check_split_hygiene()

    path = str(tmp_path / "leaked.jsonl")
    Manifest(manifest.entries + [leaked], 0).save(path)
    with pytest.raises(DataError):
        Manifest.load(path)


def test_manifest_round_trip(small_config, tmp_path):
    corpus = build_corpus(str(tmp_path), 1, small_config)
    manifest = build_manifest(corpus, [-5.0, 0.0], seed=1)
    assert len(manifest) == 2 * len(corpus.clean)
    path = str(tmp_path / "manifests" / "manifest.jsonl")
    manifest.save(path)
    loaded = Manifest.load(path)
    assert [e.model_dump() for e in loaded] == [e.model_dump() for e in manifest]
    assert build_manifest(corpus, [-5.0, 0.0], seed=1).entries == manifest.entries


def test_malformed_manifests(tmp_path):
    with pytest.raises(DataError):
        Manifest.load(str(tmp_path / "missing.jsonl"))
    path = tmp_path / "broken.jsonl"
    path.write_text('{"version": 1, "seed": 0}\n{"track_id": 3}\n')
    with pytest.raises(DataError):
        Manifest.load(str(path))
