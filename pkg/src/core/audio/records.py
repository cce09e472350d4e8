import hashlib
import os
from typing import Callable, Optional

from cachetools import LRUCache

from src.core.audio.stft import TfRepresentation
from src.core.exceptions import DataError
from src.core.utils.logging import ServiceLogger

logger = ServiceLogger(__name__)

RECORD_SUFFIX = ".setf"


def cache_key(*parts) -> str:
    """Stable file-safe key for a TF embedding (e.g. track id, role, compression scale)."""
    return hashlib.sha256("|".join(map(str, parts)).encode("utf-8")).hexdigest()[:32]


class TfCache:
    """
    Keeps recently used TF embeddings in memory and persists them as binary records under
    ``<root>/tf/<key>.setf``. With ``root`` None the cache is memory only.
    """

    def __init__(self, root: Optional[str] = None, maxsize: int = 256):
        self.root = os.path.join(root, "tf") if root else None
        self._memory = LRUCache(maxsize=maxsize)
        if self.root:
            os.makedirs(self.root, exist_ok=True)

    def _path(self, key: str) -> str:
        return os.path.join(self.root, f"{key}{RECORD_SUFFIX}")

    def get(self, key: str) -> Optional[TfRepresentation]:
        if key in self._memory:
            return self._memory[key]
        if not self.root or not os.path.exists(self._path(key)):
            return None
        with open(self._path(key), "rb") as file:
            payload = file.read()
        try:
            tf = TfRepresentation.from_bytes(payload)
        except DataError as ex:
            logger.warning(f"Discarding unreadable TF record {key}: {ex}")
            os.remove(self._path(key))
            return None
        self._memory[key] = tf
        return tf

    def put(self, key: str, tf: TfRepresentation) -> TfRepresentation:
        """Stores ``tf``; a persisted entry is returned as read back from its float32 record."""
        if self.root:
            payload = tf.to_bytes()
            with open(self._path(key), "wb") as file:
                file.write(payload)
            tf = TfRepresentation.from_bytes(payload)
        self._memory[key] = tf
        return tf

    def get_or_compute(
        self, key: str, compute: Callable[[], TfRepresentation]
    ) -> TfRepresentation:
        tf = self.get(key)
        if tf is None:
            logger.debug(f"TF cache miss for {key}")
            tf = self.put(key, compute())
        return tf

    def __len__(self):
        return len(self._memory)
