import os
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import requests
from requests.adapters import HTTPAdapter
from retry.api import retry_call

import src.core.utils.functions as F
from src.core.audio.waveform import Waveform, to_wav_bytes
from src.core.config.manager import ConfigManager
from src.core.constants import (
    ASR_RETRIES_ENV,
    ASR_TIMEOUT_ENV,
    ASR_URL_ENV,
    ConfigNames,
)
from src.core.exceptions import (
    AsrEndpointUnreachable,
    AsrServiceError,
    AsrTimeout,
    AsrUnexpectedResponse,
    ConfigError,
)
from src.core.utils.logging import ServiceLogger
from src.metrics.asr.recognizer import ToneRecognizer, load_lookup_table

logger = ServiceLogger(__name__)

_DEFAULT_HEADERS = {"Content-Type": "audio/wav"}


class AsrProvider(Enum):
    LOCAL = "local"
    HTTP = "http"


def resolve_client_config(client_config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Client settings: the metrics-asr-client document, then ``client_config``, then the
    environment, each overriding the previous one.
    """
    config = ConfigManager().load_config(ConfigNames.ASR_CLIENT) or {}
    config.update(client_config or {})
    environment = {
        "url": (ASR_URL_ENV, str),
        "timeout": (ASR_TIMEOUT_ENV, float),
        "retries": (ASR_RETRIES_ENV, int),
    }
    for key, (variable, cast) in environment.items():
        value = os.environ.get(variable)
        if value:
            try:
                config[key] = cast(value)
            except ValueError:
                raise ConfigError(f"{variable}={value!r} is not a valid {cast.__name__}")
    return config


class AsrClient(ABC):
    def __init__(self, max_concurrency: int = 4):
        self.max_concurrency = max(1, int(max_concurrency))

    @abstractmethod
    def transcribe(self, audio: Waveform) -> str:
        pass

    def transcribe_batch(self, audios: Sequence[Waveform]) -> List[str]:
        """Transcripts in input order; at most ``max_concurrency`` requests run at once."""
        if not audios:
            return []
        with ThreadPoolExecutor(max_workers=self.max_concurrency) as executor:
            return list(executor.map(self.transcribe, audios))


class LocalAsrClient(AsrClient):
    def __init__(self, recognizer: ToneRecognizer = None, max_concurrency: int = 4):
        super().__init__(max_concurrency)
        self.recognizer = recognizer or ToneRecognizer()

    def transcribe(self, audio: Waveform) -> str:
        return self.recognizer.transcribe(audio)


class HttpAsrClient(AsrClient):
    """
    Posts WAV bytes to an ASR endpoint and reads ``{"transcript": ...}`` back. Connection failures
    are retried ``retries`` times; timeouts and HTTP errors are not.
    """

    def __init__(
        self,
        url: str,
        timeout: float = 30,
        retries: int = 2,
        retry_delay: float = 0.5,
        max_concurrency: int = 4,
    ):
        super().__init__(max_concurrency)
        self.url = url
        self.timeout = timeout
        self.retries = max(0, int(retries))
        self.retry_delay = retry_delay
        self.session = requests.Session()
        adapter = HTTPAdapter(
            pool_connections=1, pool_maxsize=self.max_concurrency
        )
        self.session.mount("http://", adapter)
        self.session.mount("https://", adapter)

    def _post(self, payload: bytes) -> requests.Response:
        try:
            return self.session.post(
                self.url, data=payload, headers=_DEFAULT_HEADERS, timeout=self.timeout
            )
        except requests.exceptions.ReadTimeout:
            raise AsrTimeout(f"ASR endpoint {self.url} timed out after {self.timeout} s")

    def transcribe(self, audio: Waveform) -> str:
        """
        :raise: AsrEndpointUnreachable: If no connection could be made in 1 + retries attempts
        :raise: AsrTimeout: If the endpoint does not answer within the timeout
        :raise: AsrServiceError: If the endpoint answers with an error status or a malformed body
        """
        payload = to_wav_bytes(audio)
        attempts = self.retries + 1
        try:
            response = retry_call(
                self._post,
                fargs=[payload],
                exceptions=requests.exceptions.ConnectionError,
                tries=attempts,
                delay=self.retry_delay,
                logger=logger,
            )
        except requests.exceptions.ConnectionError:
            raise AsrEndpointUnreachable(self.url, attempts)

        if response.status_code != 200:
            logger.error(f"ASR endpoint answered {response.status_code}: {response.text}")
            raise AsrServiceError.from_status(
                response.status_code,
                "ASR request failed",
                url=self.url,
                text=response.text,
            )
        try:
            transcript = response.json()["transcript"]
        except (ValueError, KeyError, TypeError):
            raise AsrUnexpectedResponse(
                "ASR response carries no transcript",
                status_code=response.status_code,
                url=self.url,
                text=response.text,
            )
        return str(transcript)

    def close(self):
        self.session.close()


class AsrClientProvider:
    @classmethod
    def build(cls, client_config: Optional[Dict[str, Any]] = None) -> AsrClient:
        """
        Builds the client named by the ``provider`` key of the resolved client settings.

        :raise: ConfigError: If the provider is unknown
        """
        config = resolve_client_config(client_config)
        try:
            provider = F.get_enum_from_value(config.get("provider", "local"), AsrProvider)
        except ValueError as ex:
            raise ConfigError(str(ex))
        max_concurrency = config.get("max_concurrency", 4)
        logger.debug(f"Building {provider.value} ASR client")
        if provider == AsrProvider.HTTP:
            return HttpAsrClient(
                url=config["url"],
                timeout=config.get("timeout", 30),
                retries=config.get("retries", 2),
                retry_delay=config.get("retry_delay", 0.5),
                max_concurrency=max_concurrency,
            )
        recognizer = ToneRecognizer(lookup_table=load_lookup_table(config.get("lookup_table")))
        return LocalAsrClient(recognizer, max_concurrency=max_concurrency)


def transcribe(audio: Waveform, client_config: Optional[Dict[str, Any]] = None) -> str:
    return AsrClientProvider.build(client_config).transcribe(audio)


def transcribe_batch(
    audios: Sequence[Waveform], client_config: Optional[Dict[str, Any]] = None
) -> List[str]:
    return AsrClientProvider.build(client_config).transcribe_batch(audios)
