"""
PESQ plug-ins. PESQ itself is never computed here: the score comes from an external executable
(two WAV paths in, one score line out) or from the ``pesq`` package.
"""

import os
import shlex
import subprocess
import tempfile
from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

import src.core.utils.functions as F
from src.core.audio.waveform import Waveform, write_wav
from src.core.config.manager import ConfigManager
from src.core.constants import PESQ_COMMAND_ENV, SAMPLE_RATE, ConfigNames
from src.core.exceptions import ConfigError, PesqPluginError, ShapeError
from src.core.utils.logging import ServiceLogger

logger = ServiceLogger(__name__)


class PesqProvider(Enum):
    EXTERNAL = "external"
    PYTHON = "python"
    NONE = "none"


class PesqScorer(ABC):
    @abstractmethod
    def score(self, clean: Waveform, estimate: Waveform) -> float:
        pass

    def __call__(self, clean: Waveform, estimate: Waveform) -> float:
        if clean.n != estimate.n:
            raise ShapeError(f"Clean ({clean.n}) and estimate ({estimate.n}) lengths differ")
        return self.score(clean, estimate)


class ExternalPesqScorer(PesqScorer):
    """
    Runs ``command + [clean.wav, estimate.wav]`` and parses the last non-empty stdout line as
    the score.
    """

    def __init__(self, command: List[str], timeout: float = 60):
        if not command:
            raise ConfigError("The external PESQ plug-in needs a command")
        self.command = list(command)
        self.timeout = timeout

    def score(self, clean: Waveform, estimate: Waveform) -> float:
        with tempfile.TemporaryDirectory(prefix="pesq_") as directory:
            clean_path = os.path.join(directory, "clean.wav")
            estimate_path = os.path.join(directory, "estimate.wav")
            write_wav(clean_path, clean)
            write_wav(estimate_path, estimate)
            try:
                completed = subprocess.run(
                    self.command + [clean_path, estimate_path],
                    capture_output=True,
                    text=True,
                    timeout=self.timeout,
                )
            except (OSError, subprocess.TimeoutExpired) as ex:
                raise PesqPluginError(f"PESQ plug-in {self.command[0]} failed to run: {ex}")
        if completed.returncode != 0:
            raise PesqPluginError(
                f"PESQ plug-in exited with {completed.returncode}: {completed.stderr.strip()}"
            )
        lines = [line.strip() for line in completed.stdout.splitlines() if line.strip()]
        try:
            return float(lines[-1])
        except (IndexError, ValueError):
            raise PesqPluginError(f"PESQ plug-in printed no score: {completed.stdout!r}")


class PythonPesqScorer(PesqScorer):
    def __init__(self, mode: str = "wb"):
        try:
            import pesq  # noqa: F401
        except ImportError as ex:
            raise PesqPluginError(f"The pesq package is not installed: {ex}")
        self.mode = mode

    def score(self, clean: Waveform, estimate: Waveform) -> float:
        from pesq import PesqError, pesq

        try:
            return float(
                pesq(
                    SAMPLE_RATE,
                    clean.numpy().astype(np.float32),
                    estimate.numpy().astype(np.float32),
                    self.mode,
                )
            )
        except PesqError as ex:
            raise PesqPluginError(f"pesq failed: {ex}")


class PesqScorerProvider:
    @classmethod
    def build(cls, pesq_config: Optional[Dict[str, Any]] = None) -> Optional[PesqScorer]:
        """
        :returns: The configured scorer, or None when the provider is ``none``
        :raise: ConfigError: If the provider is unknown or the external command is missing
        """
        config = ConfigManager().load_config(ConfigNames.PESQ) or {}
        config.update(pesq_config or {})
        command = os.environ.get(PESQ_COMMAND_ENV)
        if command:
            config.update(provider=PesqProvider.EXTERNAL.value, command=shlex.split(command))
        try:
            provider = F.get_enum_from_value(config.get("provider", "none"), PesqProvider)
        except ValueError as ex:
            raise ConfigError(str(ex))

        logger.debug(f"Building {provider.value} PESQ scorer")
        if provider == PesqProvider.EXTERNAL:
            return ExternalPesqScorer(config.get("command") or [], config.get("timeout", 60))
        if provider == PesqProvider.PYTHON:
            return PythonPesqScorer(config.get("mode", "wb"))
        return None
