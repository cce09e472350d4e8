import logging
import threading
from typing import Optional, Tuple

from flask import Flask, jsonify, request
from waitress import create_server, serve

from src.core.audio.waveform import from_wav_bytes
from src.core.config.manager import ConfigManager
from src.core.constants import ConfigNames
from src.core.exceptions import DataError
from src.core.utils.logging import ServiceLogger
from src.metrics.asr.recognizer import ToneRecognizer, load_lookup_table

logger = ServiceLogger(__name__)

_SERVER_HOST: str = "localhost"
_SERVER_PORT: int = 5055


def create_app(recognizer: ToneRecognizer = None) -> Flask:
    """
    Flask app serving the tone-vocabulary recognizer.

    POST /transcribe takes WAV bytes and answers ``{"transcript": ...}``; GET /health answers
    ``{"status": "ok"}``.
    """
    recognizer = recognizer or ToneRecognizer()
    app = Flask(__name__)

    @app.route("/health", methods=["GET"])
    def health():
        return jsonify({"status": "ok"})

    @app.route("/transcribe", methods=["POST"])
    def transcribe():
        payload = request.get_data()
        if not payload:
            logger.warning("Empty transcription request")
            return jsonify({"error": "empty body"}), 400
        try:
            audio = from_wav_bytes(payload)
        except DataError as ex:
            logger.warning(f"Rejected transcription request: {ex}")
            return jsonify({"error": str(ex)}), 415
        transcript = recognizer.transcribe(audio)
        logger.debug(f"Transcribed {audio.duration:.2f} s: '{transcript}'")
        return jsonify({"transcript": transcript})

    return app


def _route_waitress_logs():
    waitress_logger = logging.getLogger("waitress")
    waitress_logger.handlers = logger.handlers
    waitress_logger.setLevel(logger.level)
    waitress_logger.propagate = False


def _settings(host: Optional[str], port: Optional[int], lookup_table: Optional[str]):
    config = ConfigManager().load_config(ConfigNames.ASR_SERVER) or {}
    return (
        host or config.get("host", _SERVER_HOST),
        port if port is not None else config.get("port", _SERVER_PORT),
        lookup_table or config.get("lookup_table"),
    )


def run(host: str = None, port: int = None, lookup_table: str = None) -> None:
    """Serves the stub with waitress until interrupted."""
    host, port, lookup_table = _settings(host, port, lookup_table)
    app = create_app(ToneRecognizer(lookup_table=load_lookup_table(lookup_table)))
    _route_waitress_logs()
    logger.info(f"Serving stub ASR on http://{host}:{port}")
    serve(app, host=host, port=port)


def start_in_background(
    recognizer: ToneRecognizer = None, host: str = "127.0.0.1", port: int = 0
) -> Tuple[object, str]:
    """
    Starts the stub on a daemon thread and returns the waitress server with its transcribe URL.
    Port 0 picks a free port; call ``server.close()`` to stop it.
    """
    server = create_server(create_app(recognizer), host=host, port=port)
    _route_waitress_logs()
    threading.Thread(name="asr_stub", target=server.run, daemon=True).start()
    url = f"http://{host}:{server.effective_port}/transcribe"
    logger.info(f"Stub ASR listening on {url}")
    return server, url
