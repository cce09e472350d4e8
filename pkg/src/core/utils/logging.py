import logging
import os
import sys
import time
from src.core.constants import (
    CROSSDOMAIN_SE_LOGGING_LEVEL,
    LOGGING_DIR,
    LOGGING_ONLY_CONSOLE,
)

_DEFAULT_FORMAT = (
    "%(asctime)s - %(name)s - %(funcName)s - %(levelname)s - %(message)s"
)


class TruncateByTimeHandler(logging.FileHandler):
    """
    File handler that empties its file once the configured interval has elapsed.
    One instance per file name, so every logger writing to the same file shares it.
    """

    _instances = {}

    def __new__(cls, filename, *args, **kwargs):
        if filename not in cls._instances:
            cls._instances[filename] = super().__new__(cls)
        return cls._instances[filename]

    def __init__(
        self, filename, mode="a", encoding="utf-8", interval_seconds=3600
    ):
        """
        :param: filename: Name of the file to write logs to.
        :param: mode: File mode (default is append 'a').
        :param: encoding: File encoding (default is 'utf-8').
        :param: interval_seconds: Seconds after which the log file is truncated.
        """
        if getattr(self, "_configured", False):
            return
        super().__init__(filename=filename, mode=mode, encoding=encoding)
        self.interval_seconds = interval_seconds
        self.last_truncate_time = time.time()
        self._configured = True

    def emit(self, record):
        super().emit(record)
        current_time = time.time()
        if current_time - self.last_truncate_time > self.interval_seconds:
            self._truncate_file()
            self.last_truncate_time = current_time

    def _truncate_file(self):
        with open(self.baseFilename, "r+") as file:
            file.truncate()


def _level_from_environment() -> int:
    return logging.getLevelNamesMapping().get(
        os.environ.get(CROSSDOMAIN_SE_LOGGING_LEVEL, "INFO").upper(),
        logging.INFO,
    )


class ServiceLogger(logging.Logger):
    """
    Module-level logger for the toolkit.

    Writes to stdout and, unless LOGGING_ONLY_CONSOLE is set, to <DATA_DIR>/logs/<name>.log.
    The level is read from CROSSDOMAIN_SE_LOGGING_LEVEL.
    """

    def __init__(
        self,
        name: str,
        main=False,
        noconsole=False,
        formatter=_DEFAULT_FORMAT,
    ):
        super().__init__(name)
        self.filename = "Main" if main else self.name
        self.noconsole = noconsole
        self.formatter = formatter

        if not self.hasHandlers():
            self._init_handlers()

    def _init_file_handler(self, log_level):
        try:
            os.makedirs(LOGGING_DIR, exist_ok=True)
            filehandler = TruncateByTimeHandler(
                filename=os.path.join(LOGGING_DIR, f"{self.filename}.log"),
                encoding="utf-8",
                mode="a+",
            )
            filehandler.setLevel(log_level)
            filehandler.setFormatter(logging.Formatter(self.formatter))
            self.addHandler(filehandler)
        except OSError as ex:
            self.error(f"Error adding handler to file {ex}")

    def _init_handlers(self):
        log_level = _level_from_environment()
        self.setLevel(log_level)
        only_console = os.environ.get(LOGGING_ONLY_CONSOLE, False)

        if not self.noconsole or only_console:
            stdhandler = logging.StreamHandler(sys.stdout)
            stdhandler.setLevel(log_level)
            stdhandler.setFormatter(logging.Formatter(self.formatter))
            self.addHandler(stdhandler)

        if not only_console:
            self._init_file_handler(log_level)


class DefaultLogger(ServiceLogger):
    """
    Logger class installed for loggers obtained through logging.getLogger; writes to Main.log.
    """

    def __init__(self, name: str):
        super().__init__(name, main=True)


def attach_run_log(logger: logging.Logger, run_dir: str) -> logging.Handler:
    """
    Adds a handler writing to <run_dir>/train.log so a run directory carries its own log.

    :param logger: Logger to extend
    :param run_dir: Run directory, created if missing
    :return: The handler, so callers can detach it when the run ends
    """
    os.makedirs(run_dir, exist_ok=True)
    handler = logging.FileHandler(
        os.path.join(run_dir, "train.log"), mode="a", encoding="utf-8"
    )
    handler.setLevel(logger.level)
    handler.setFormatter(logging.Formatter(_DEFAULT_FORMAT))
    logger.addHandler(handler)
    return handler


def detach_run_log(logger: logging.Logger, handler: logging.Handler) -> None:
    logger.removeHandler(handler)
    handler.close()


class StreamToLogger:
    """
    Fake file-like stream object that redirects writes to a logger instance.
    """

    def __init__(self, logger, level):
        self.logger = logger
        self.level = level

    def write(self, buf):
        for line in buf.rstrip().splitlines():
            self.logger.log(self.level, line.rstrip())

    def flush(self):
        pass
