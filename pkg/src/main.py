import argparse
import logging
import shlex
import sys
from typing import List, Optional

from src import logger
from src.core.config.manager import ConfigManager
from src.core.constants import ConfigNames
from src.core.exceptions import SpeechEnhancementError
from src.core.utils.logging import StreamToLogger
from src.harness.config import RunConfig
from src.harness.pipeline import enhance_run, evaluate_noisy, evaluate_run, mix
from src.harness.reporting import report
from src.harness.trainer import train
from src.metrics.asr import stub_server
from src.metrics.asr.client import AsrClientProvider
from src.metrics.pesq import PesqScorerProvider

"""
Command line entry point: mix -> train -> enhance -> evaluate -> report, plus serve-asr for the
stub recognizer. Every SpeechEnhancementError escaping a subcommand becomes its exit code.
"""


def _apply_global_options(args: argparse.Namespace):
    manager = ConfigManager()
    if args.config:
        manager.merge_overrides_file(args.config)
    if getattr(args, "asr_url", None):
        manager.save_config(ConfigNames.ASR_CLIENT, {"provider": "http", "url": args.asr_url})
    if getattr(args, "pesq_command", None):
        manager.save_config(
            ConfigNames.PESQ,
            {"provider": "external", "command": shlex.split(args.pesq_command)},
        )
    if getattr(args, "no_pesq", False):
        manager.save_config(ConfigNames.PESQ, {"provider": "none"})


def _build_scorers():
    return AsrClientProvider.build(), PesqScorerProvider.build()


def cmd_mix(args: argparse.Namespace) -> int:
    manifest = mix(args.output_dir, args.seed, args.snr, args.workers)
    logger.info(f"Manifest with {len(manifest)} entries written to {manifest.path}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.run_config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.manifest:
        cfg.manifest = args.manifest
    if args.snr:
        cfg.snr_list = args.snr
    record = train(cfg, args.run_dir)
    logger.info(f"Run {record.name} finished with {len(record.checkpoints)} checkpoints")
    return 0


def cmd_enhance(args: argparse.Namespace) -> int:
    enhance_run(args.run_dir, args.manifest, args.checkpoint, args.workers)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    asr_client, pesq_scorer = _build_scorers()
    if args.noisy:
        evaluate_noisy(
            args.manifest, args.run_dir, args.snr or [0.0, 5.0], asr_client, pesq_scorer, args.workers
        )
    else:
        evaluate_run(args.run_dir, args.manifest, asr_client, pesq_scorer, args.workers)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    files = report(args.run_dir, args.output_dir)
    with open(files.table_md, "r", encoding="utf-8") as file:
        print(file.read())
    return 0


def cmd_serve_asr(args: argparse.Namespace) -> int:
    stub_server.run(args.host, args.port, args.lookup_table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossdomain-se",
        description="Cross-domain speech enhancement training and evaluation harness",
    )
    parser.add_argument("--config", help="JSON list of configuration documents to merge over the defaults")
    subparsers = parser.add_subparsers(dest="command", required=True)

    mix_parser = subparsers.add_parser("mix", help="Synthesize the corpus and build the manifest")
    mix_parser.add_argument("--output-dir", required=True)
    mix_parser.add_argument("--seed", type=int, default=0)
    mix_parser.add_argument("--snr", type=float, nargs="+", default=[0.0, 5.0])
    mix_parser.add_argument("--workers", type=int, default=1)
    mix_parser.set_defaults(handler=cmd_mix)

    train_parser = subparsers.add_parser("train", help="Train one framework")
    train_parser.add_argument("--run-config", required=True, help="Run config JSON file")
    train_parser.add_argument("--run-dir", required=True)
    train_parser.add_argument("--seed", type=int)
    train_parser.add_argument("--manifest")
    train_parser.add_argument("--snr", type=float, nargs="+")
    train_parser.set_defaults(handler=cmd_train)

    enhance_parser = subparsers.add_parser("enhance", help="Enhance the test split with a run")
    enhance_parser.add_argument("--run-dir", required=True)
    enhance_parser.add_argument("--manifest")
    enhance_parser.add_argument("--checkpoint", help="Defaults to the latest checkpoint of the run")
    enhance_parser.add_argument("--workers", type=int, default=1)
    enhance_parser.set_defaults(handler=cmd_enhance)

    evaluate_parser = subparsers.add_parser("evaluate", help="Score the enhanced tracks of a run")
    evaluate_parser.add_argument("--run-dir", required=True)
    evaluate_parser.add_argument("--manifest")
    evaluate_parser.add_argument(
        "--noisy", action="store_true", help="Score the unprocessed mixtures instead"
    )
    evaluate_parser.add_argument("--snr", type=float, nargs="+")
    evaluate_parser.add_argument("--asr-url", help="Transcribe through this HTTP endpoint")
    evaluate_parser.add_argument("--pesq-command", help="External PESQ executable and arguments")
    evaluate_parser.add_argument("--no-pesq", action="store_true")
    evaluate_parser.add_argument("--workers", type=int, default=1)
    evaluate_parser.set_defaults(handler=cmd_evaluate)

    report_parser = subparsers.add_parser("report", help="Write the comparison table and boxplot data")
    report_parser.add_argument("--run-dir", required=True, action="append")
    report_parser.add_argument("--output-dir", required=True)
    report_parser.set_defaults(handler=cmd_report)

    serve_parser = subparsers.add_parser("serve-asr", help="Serve the stub recognizer over HTTP")
    serve_parser.add_argument("--host")
    serve_parser.add_argument("--port", type=int)
    serve_parser.add_argument("--lookup-table")
    serve_parser.set_defaults(handler=cmd_serve_asr)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "evaluate" and args.noisy and not args.manifest:
        parser.error("evaluate --noisy needs --manifest")
    try:
        _apply_global_options(args)
        return args.handler(args)
    except SpeechEnhancementError as ex:
        logger.error(f"{args.command} failed: {ex}")
        return ex.exit_code


if __name__ == "__main__":
    sys.stderr = StreamToLogger(logger, logging.ERROR)
    sys.exit(main())
