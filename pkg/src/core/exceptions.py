"""
Custom exceptions for the speech enhancement toolkit.
Every error carries the exit code the command line returns when it escapes a subcommand.
"""


class SpeechEnhancementError(Exception):
    exit_code = 1

    def __init__(self, message: str = None):
        super().__init__(message or self.__class__.__name__)


class ConfigError(SpeechEnhancementError):
    """
    Raised when a configuration, a model spec or a loss wiring is invalid.
    """

    exit_code = 2


class InvalidSpecError(ConfigError, ValueError):
    pass


class IllegalCombinationError(ConfigError, ValueError):
    """
    Raised when a framework is paired with a model family or loss wiring it does not support.
    """

    pass


class LossConfigError(ConfigError, ValueError):
    pass


class CheckpointMismatchError(ConfigError):
    pass


class DataError(SpeechEnhancementError):
    """
    Raised when input audio, embeddings or manifests violate their contracts.
    """

    exit_code = 3


class LengthOutOfRangeError(DataError, ValueError):
    def __init__(self, n: int, n_min: int, n_max: int):
        self.n = n
        self.n_min = n_min
        self.n_max = n_max
        super().__init__(
            f"Track length {n} outside the supported range [{n_min}, {n_max}]"
        )


class PlanMismatchError(DataError, ValueError):
    pass


class ShapeError(DataError, ValueError):
    pass


class DomainMismatchError(DataError, ValueError):
    pass


class NegativeMagnitudeError(DataError, ValueError):
    pass


class SilentSignalError(DataError, ValueError):
    pass


class NoiseTooShortError(DataError, ValueError):
    pass


class TooShortError(DataError, ValueError):
    pass


class FixedLengthViolationError(DataError, ValueError):
    pass


class AlignmentError(DataError, ValueError):
    pass


class MissingPhaseError(DataError, ValueError):
    pass


class CalibrationError(DataError, ValueError):
    """
    Raised when a loss term evaluates to zero on the calibration batch, so no weight can equalize it.
    """

    pass


class EmptyReferenceError(DataError, ValueError):
    pass


class ProbabilityDomainError(DataError, ValueError):
    pass


class ExternalServiceError(SpeechEnhancementError):
    """
    Raised when an external scorer (ASR endpoint, PESQ plug-in) fails.
    """

    exit_code = 4


class AsrServiceError(ExternalServiceError):
    def __init__(self, message=None, status_code=None, url=None, text=None):
        self.status_code = status_code
        self.url = url
        self.text = text
        super().__init__(message)

    def __str__(self):
        return f"{self.args[0]}, status {self.status_code} on {self.url}"

    @classmethod
    def from_status(cls, status_code: int, *args, **kwargs):
        _STATUS_EXCEPTION_MAP = {
            400: AsrBadRequest,
            413: AsrBadRequest,
            415: AsrBadRequest,
            500: AsrServerError,
            502: AsrServiceUnavailable,
            503: AsrServiceUnavailable,
        }

        return _STATUS_EXCEPTION_MAP.get(status_code, AsrUnexpectedResponse)(
            *args, status_code=status_code, **kwargs
        )


class AsrBadRequest(AsrServiceError):
    pass


class AsrServerError(AsrServiceError):
    pass


class AsrServiceUnavailable(AsrServiceError):
    pass


class AsrUnexpectedResponse(AsrServiceError):
    pass


class AsrEndpointUnreachable(ExternalServiceError):
    def __init__(self, url: str, attempts: int):
        self.url = url
        self.attempts = attempts
        super().__init__(
            f"ASR endpoint {url} unreachable after {attempts} attempt(s)"
        )


class AsrTimeout(ExternalServiceError):
    pass


class PesqPluginError(ExternalServiceError):
    pass


class MissingPesqError(ExternalServiceError):
    def __init__(self, message: str = None):
        super().__init__(
            message
            or "No PESQ scorer is plugged in; composite measures need a PESQ score."
        )
