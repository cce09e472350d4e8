"""
Run directory layout:

    config.json        run config snapshot
    train.log          run log
    losses.jsonl       one line per generator step
    checkpoints/       epoch_<NNN>.pt
    enhanced/          enhanced WAVs of the test split and their index.jsonl
    metrics.jsonl      one MetricsReport per (SNR, test track)
    record.json        run summary: epoch losses, checkpoints, aggregate rows per SNR
"""

import json
import os
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from src.core.exceptions import DataError
from src.core.utils.logging import ServiceLogger
from src.metrics.report import MetricsReport, aggregate

logger = ServiceLogger(__name__)

RECORD_FILE = "record.json"
METRICS_FILE = "metrics.jsonl"
CONFIG_FILE = "config.json"
LOSSES_FILE = "losses.jsonl"
CHECKPOINT_DIR = "checkpoints"
ENHANCED_DIR = "enhanced"
ENHANCED_INDEX = "index.jsonl"

AGGREGATE_TOLERANCE = 1e-9


def snr_key(snr_db: float) -> str:
    return f"{float(snr_db):g}"


class RunRecord(BaseModel):
    name: str
    framework: str
    seed: int = 0
    config: Dict[str, Any] = Field(default_factory=dict)
    epoch_losses: List[Dict[str, float]] = Field(default_factory=list)
    checkpoints: List[str] = Field(default_factory=list)
    reports: Dict[str, List[MetricsReport]] = Field(default_factory=dict, exclude=True)
    aggregates: Dict[str, MetricsReport] = Field(default_factory=dict)

    @property
    def latest_checkpoint(self) -> Optional[str]:
        return self.checkpoints[-1] if self.checkpoints else None

    @property
    def snr_values(self) -> List[float]:
        return sorted(float(key) for key in self.reports)

    def set_reports(self, snr_db: float, reports: List[MetricsReport]):
        key = snr_key(snr_db)
        self.reports[key] = list(reports)
        self.aggregates[key] = aggregate(reports)

    def check_aggregates(self):
        """
        :raise: DataError: If a stored aggregate row is not the column mean of its track reports
        """
        if set(self.aggregates) != set(self.reports):
            raise DataError(
                f"Aggregates for SNRs {sorted(self.aggregates)} but reports for {sorted(self.reports)}"
            )
        for key, reports in self.reports.items():
            stored = self.aggregates[key].as_row()
            recomputed = aggregate(reports).as_row()
            for column, value in recomputed.items():
                other = stored[column]
                if (value is None) != (other is None) or (
                    value is not None and not np.isclose(value, other, atol=AGGREGATE_TOLERANCE)
                ):
                    raise DataError(
                        f"Aggregate {column} at {key} dB is {other}, per-track mean is {value}"
                    )

    def save(self, run_dir: str):
        os.makedirs(run_dir, exist_ok=True)
        with open(os.path.join(run_dir, RECORD_FILE), "w", encoding="utf-8") as file:
            json.dump(self.model_dump(mode="json"), file, indent=2, sort_keys=True)
        with open(os.path.join(run_dir, METRICS_FILE), "w", encoding="utf-8") as file:
            for key in sorted(self.reports, key=float):
                for report in self.reports[key]:
                    line = {"snr_db": float(key), **report.model_dump(mode="json")}
                    file.write(json.dumps(line, sort_keys=True) + "\n")
        logger.debug(f"Saved run record to {run_dir}")

    @classmethod
    def load(cls, run_dir: str) -> "RunRecord":
        """
        Loads a run directory and checks every aggregate against the per-track reports.

        :raise: DataError: If the record is missing, malformed or inconsistent
        """
        path = os.path.join(run_dir, RECORD_FILE)
        if not os.path.exists(path):
            raise DataError(f"No run record in {run_dir}")
        try:
            with open(path, "r", encoding="utf-8") as file:
                record = cls.model_validate(json.load(file))
            reports: Dict[str, List[MetricsReport]] = {}
            metrics_path = os.path.join(run_dir, METRICS_FILE)
            if os.path.exists(metrics_path):
                with open(metrics_path, "r", encoding="utf-8") as file:
                    for line in file:
                        if not line.strip():
                            continue
                        values = json.loads(line)
                        key = snr_key(values.pop("snr_db"))
                        reports.setdefault(key, []).append(MetricsReport.model_validate(values))
        except (json.JSONDecodeError, ValidationError, KeyError) as ex:
            raise DataError(f"Malformed run record in {run_dir}: {ex}")
        record.reports = reports
        record.check_aggregates()
        return record


def checkpoint_path(run_dir: str, epoch: int) -> str:
    return os.path.join(run_dir, CHECKPOINT_DIR, f"epoch_{epoch:03d}.pt")
