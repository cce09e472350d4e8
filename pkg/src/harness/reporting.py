import os
from dataclasses import dataclass
from typing import List, Optional, Sequence

import pandas as pd
from jinja2 import Template

from src.core.config.manager import ConfigManager
from src.core.constants import TABLE_COLUMNS, TEMPLATES_DIR, ConfigNames
from src.core.exceptions import ConfigError, DataError
from src.core.utils.logging import ServiceLogger
from src.harness.records import RunRecord
from src.metrics.report import MetricsReport

logger = ServiceLogger(__name__)

TABLE_CSV = "table.csv"
TABLE_MD = "table.md"
BOXPLOT_CSV = "boxplot.csv"
BOXPLOT_COLUMNS = ["track_id", "ssnr_db", "one_minus_wer"]
MISSING = "-"


def load_template(path: str) -> Template:
    with open(path, "r", encoding="utf-8") as fp:
        return Template(fp.read())


def boxplot_file(model: str, snr_db: float) -> str:
    return f"boxplot_{model}_{snr_db:g}dB.csv"


@dataclass
class ReportFiles:
    table_csv: str
    table_md: str
    boxplots: List[str]
    combined_boxplot: str


class Reporter:
    """
    Turns run records into the comparison table (one row per model and SNR, columns in table order)
    and the per-track SSNR and 1-WER distributions behind the boxplots.
    """

    def __init__(self):
        self.template = "table.md.j2"
        self.float_format = "%.2f"
        self.reload_config()

    def reload_config(self):
        config = ConfigManager().load_config(ConfigNames.REPORT) or {}
        for key, value in config.items():
            setattr(self, key, value)

    def table(self, records: Sequence[RunRecord]) -> pd.DataFrame:
        rows = []
        for record in records:
            for snr in sorted(record.aggregates, key=float):
                rows.append(
                    {"model": record.name, "snr_db": float(snr), **record.aggregates[snr].as_row()}
                )
        return pd.DataFrame(rows, columns=["model", "snr_db", *TABLE_COLUMNS])

    @staticmethod
    def boxplot_frame(reports: Sequence[MetricsReport]) -> pd.DataFrame:
        return pd.DataFrame(
            [[report.track_id, report.ssnr_db, report.one_minus_wer] for report in reports],
            columns=BOXPLOT_COLUMNS,
        )

    def _format(self, value: Optional[float]) -> str:
        if value is None or pd.isna(value):
            return MISSING
        return self.float_format % value

    def render_markdown(self, table: pd.DataFrame) -> str:
        path = os.path.join(TEMPLATES_DIR, self.template)
        if not os.path.exists(path):
            raise ConfigError(f"Report template {path} does not exist")
        rows = [
            {
                "model": row["model"],
                "snr_db": f"{row['snr_db']:g}",
                "cells": {column: self._format(row[column]) for column in TABLE_COLUMNS},
            }
            for _, row in table.iterrows()
        ]
        return load_template(path).render(columns=TABLE_COLUMNS, rows=rows)

    def write(self, records: Sequence[RunRecord], output_dir: str) -> ReportFiles:
        """
        :param records: Loaded run records, one per model
        :param output_dir: Directory receiving the table and boxplot files
        :raise: DataError: If no record carries evaluation results or two records share a name
        """
        records = [record for record in records if record.aggregates]
        if not records:
            raise DataError("No evaluated runs to report")
        names = [record.name for record in records]
        if len(set(names)) != len(names):
            raise DataError(f"Duplicate model names in report: {names}")
        os.makedirs(output_dir, exist_ok=True)

        table = self.table(records)
        table_csv = os.path.join(output_dir, TABLE_CSV)
        table.to_csv(table_csv, index=False, float_format=self.float_format, na_rep=MISSING)
        table_md = os.path.join(output_dir, TABLE_MD)
        with open(table_md, "w", encoding="utf-8") as file:
            file.write(self.render_markdown(table))

        boxplots, frames = [], []
        for record in records:
            for snr in record.snr_values:
                frame = self.boxplot_frame(record.reports[f"{snr:g}"])
                path = os.path.join(output_dir, boxplot_file(record.name, snr))
                frame.to_csv(path, index=False)
                boxplots.append(path)
                frames.append(frame.assign(model=record.name, snr_db=snr))
        combined = os.path.join(output_dir, BOXPLOT_CSV)
        pd.concat(frames, ignore_index=True)[["model", "snr_db", *BOXPLOT_COLUMNS]].to_csv(
            combined, index=False
        )
        logger.info(f"Wrote report for {len(records)} runs, {len(table)} rows, to {output_dir}")
        return ReportFiles(table_csv, table_md, boxplots, combined)


def load_records(run_dirs: Sequence[str]) -> List[RunRecord]:
    return [RunRecord.load(run_dir) for run_dir in run_dirs]


def report(run_dirs: Sequence[str], output_dir: str) -> ReportFiles:
    return Reporter().write(load_records(run_dirs), output_dir)
