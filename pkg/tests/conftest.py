import os

os.environ.setdefault("LOGGING_ONLY_CONSOLE", "1")

import pytest  # noqa: E402

from src.core.config.manager import ConfigManager  # noqa: E402
from src.core.constants import ConfigNames  # noqa: E402
from src.data.corpus import CorpusConfig, Sentence, Speaker, synthesize_sentence  # noqa: E402
from src.harness.pipeline import MANIFEST_FILE, mix  # noqa: E402

# Four clean tracks per split, each well under the four seconds of noise.
SMALL_CORPUS = {
    "n_train_speakers": 2,
    "n_test_speakers": 2,
    "n_train_sentences": 4,
    "n_test_sentences": 2,
    "sentences_per_speaker": 2,
    "words_per_sentence": [3, 4],
    "noise_seconds": 4.0,
}


@pytest.fixture(autouse=True)
def config_manager():
    manager = ConfigManager()
    yield manager
    manager.reset()


@pytest.fixture(scope="session")
def sentence() -> Sentence:
    return Sentence("s900", ("yes", "down", "left", "go"))


@pytest.fixture(scope="session")
def speech(sentence):
    """About 1.5 s of tone-vocabulary speech with silent lead, pauses and tail."""
    return synthesize_sentence(sentence, Speaker.sample("tr99", 0), CorpusConfig.from_config(), 0)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> str:
    """A small synthesized corpus mixed at 0 and 5 dB, with its manifest."""
    root = str(tmp_path_factory.mktemp("corpus"))
    manager = ConfigManager()
    manager.save_config(ConfigNames.CORPUS, SMALL_CORPUS)
    try:
        mix(root, seed=0, snr_list=[0.0, 5.0])
    finally:
        manager.reset()
    return root


@pytest.fixture(scope="session")
def manifest_path(corpus_dir) -> str:
    return os.path.join(corpus_dir, MANIFEST_FILE)
