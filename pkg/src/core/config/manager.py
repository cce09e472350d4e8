import copy
import json
import os
import threading
from typing import Any, Dict, Iterable, List, Optional

from ..constants import DEFAULT_CONFIGS_FILE
from ..exceptions import ConfigError
from ..utils.logging import ServiceLogger

logger = ServiceLogger(__name__)


class ConfigManager:
    """
    Holds the named configuration documents of the toolkit.

    Documents are dictionaries keyed by their ``config_name``. Defaults come from
    res/json/default_configs.json; overrides (a user JSON file or the ``components`` block of a
    run config) are merged key by key over them.
    """

    _instance = None
    _instance_lock = threading.Lock()  # Class-level lock for singleton pattern
    _operation_lock = threading.RLock()  # Lock for thread-safe operations

    def __new__(cls, *args, **kwargs):
        if not cls._instance:
            with cls._instance_lock:
                if not cls._instance:
                    logger.debug("Creating new ConfigManager instance")
                    cls._instance = super(ConfigManager, cls).__new__(cls)
        return cls._instance

    def __init__(self, defaults_file: Optional[str] = None):
        if not hasattr(self, "_initialized"):
            with self._instance_lock:
                if not hasattr(self, "_initialized"):
                    logger.debug("Initializing ConfigManager")
                    self.defaults_file = defaults_file or DEFAULT_CONFIGS_FILE
                    self._documents: Dict[str, Dict[str, Any]] = {}
                    self._load_defaults()
                    self._initialized = True

    def _load_defaults(self):
        try:
            with open(self.defaults_file, "r", encoding="utf-8") as file:
                documents = json.load(file)
        except OSError as ex:
            logger.warning(f"Could not load default configs due to {ex}")
            documents = []
        except json.JSONDecodeError as ex:
            raise ConfigError(
                f"Default configs file {self.defaults_file} is not valid JSON: {ex}"
            )
        self._documents = {}
        for document in documents:
            self._store(document)

    def _store(self, document: Dict[str, Any]):
        document = copy.deepcopy(document)
        config_name = document.pop("config_name", None)
        if not config_name:
            raise ConfigError("Configuration document without 'config_name'")
        self._documents[config_name] = document

    def reset(self):
        """Drop every override and reload the defaults file."""
        with self._operation_lock:
            logger.debug("Resetting configuration documents to defaults")
            self._load_defaults()

    def save_config(self, config_name: str, config_data: Dict[str, Any]) -> bool:
        """
        Save a configuration document, replacing keys present in ``config_data``.

        :param: config_name: Name of the configuration
        :param: config_data: Configuration data to save

        :returns: bool: True if the document existed before and was updated
        """
        with self._operation_lock:
            existing = config_name in self._documents
            logger.debug(
                f"{'Updating' if existing else 'Creating'} config '{config_name}'"
            )
            merged = self._documents.get(config_name, {})
            merged.update(copy.deepcopy(config_data))
            merged.pop("config_name", None)
            self._documents[config_name] = merged
            return existing

    def load_config(self, config_name: str) -> Optional[Dict[str, Any]]:
        """
        Load a configuration document.

        :param: config_name: Name of the configuration to load

        :returns: A deep copy of the document if found, None otherwise
        """
        with self._operation_lock:
            config = self._documents.get(config_name)
            if config is None:
                logger.warning(f"Config '{config_name}' not found")
                return None
            return copy.deepcopy(config)

    def require_config(self, config_name: str) -> Dict[str, Any]:
        """Like load_config but a missing document is a ConfigError."""
        config = self.load_config(config_name)
        if config is None:
            raise ConfigError(f"Required config '{config_name}' is missing")
        return config

    def delete_config(self, config_name: str) -> bool:
        with self._operation_lock:
            logger.debug(f"Deleting config '{config_name}'")
            return self._documents.pop(config_name, None) is not None

    def list_configs(self) -> List[str]:
        with self._operation_lock:
            return sorted(self._documents.keys())

    def update_config_key(self, config_name: str, key: str, value: Any) -> bool:
        """
        Update a single key of an existing configuration document.

        :returns: bool: True if the document exists and was updated
        """
        with self._operation_lock:
            if config_name not in self._documents:
                logger.debug(f"Config '{config_name}' not found")
                return False
            self._documents[config_name][key] = copy.deepcopy(value)
            return True

    def merge_overrides(self, documents: Iterable[Dict[str, Any]] | Dict[str, Dict]):
        """
        Merge override documents over the current state.

        Accepts either a list of documents with ``config_name`` keys (the defaults file format)
        or a mapping from config name to partial document (the run config ``components`` block).
        """
        if isinstance(documents, dict):
            documents = [
                {"config_name": name, **values}
                for name, values in documents.items()
            ]
        for document in documents:
            document = dict(document)
            config_name = document.pop("config_name", None)
            if not config_name:
                raise ConfigError("Override document without 'config_name'")
            self.save_config(config_name, document)

    def merge_overrides_file(self, path: str):
        """Merge an overrides JSON file (list of named documents)."""
        if not os.path.exists(path):
            raise ConfigError(f"Overrides file {path} does not exist")
        try:
            with open(path, "r", encoding="utf-8") as file:
                documents = json.load(file)
        except json.JSONDecodeError as ex:
            raise ConfigError(f"Overrides file {path} is not valid JSON: {ex}")
        logger.info(f"Merging configuration overrides from {path}")
        self.merge_overrides(documents)
