from typing import Dict, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from src.core.audio.waveform import Waveform
from src.core.config.manager import ConfigManager
from src.core.constants import TABLE_COLUMNS, ConfigNames
from src.core.exceptions import DataError
from src.core.utils.logging import ServiceLogger
from src.metrics.composite import CompositeSettings, composite_measures, llr, wss
from src.metrics.pesq import PesqScorer
from src.metrics.ssnr import SegmentalSnr
from src.metrics.stoi import StoiSettings, stoi
from src.metrics.wer import normalize_text, wer

_OPTIONAL_COLUMNS = ("pesq", "csig", "cbak", "covl", "one_minus_wer")

logger = ServiceLogger(__name__)


class MetricsReport(BaseModel):
    """
    One track's scores, or the mean row over several tracks. PESQ and the composite measures are
    None when no PESQ scorer is plugged in. 1-WER is None when the track has no reference
    transcript.
    """

    model_config = ConfigDict(extra="forbid")

    track_id: str = ""
    pesq: Optional[float] = None
    csig: Optional[float] = None
    cbak: Optional[float] = None
    covl: Optional[float] = None
    ssnr_db: float
    stoi: float
    one_minus_wer: Optional[float] = None
    reference: Optional[str] = None
    hypothesis: Optional[str] = None

    @model_validator(mode="after")
    def _check_ranges(self):
        ssnr_config = ConfigManager().load_config(ConfigNames.SSNR) or {}
        low, high = ssnr_config.get("min_db", -10.0), ssnr_config.get("max_db", 35.0)
        if not low - 1e-9 <= self.ssnr_db <= high + 1e-9:
            raise ValueError(f"ssnr_db {self.ssnr_db} outside [{low}, {high}]")
        if not 0.0 <= self.stoi <= 1.0:
            raise ValueError(f"stoi {self.stoi} outside [0, 1]")
        if self.one_minus_wer is not None and self.one_minus_wer > 1.0 + 1e-12:
            raise ValueError(f"one_minus_wer {self.one_minus_wer} exceeds 1")
        return self

    @property
    def stoi_percent(self) -> float:
        return 100.0 * self.stoi

    def as_row(self) -> Dict[str, Optional[float]]:
        """Table columns, STOI and 1-WER in percent."""
        values = [
            self.pesq,
            self.csig,
            self.cbak,
            self.covl,
            self.ssnr_db,
            self.stoi_percent,
            None if self.one_minus_wer is None else 100.0 * self.one_minus_wer,
        ]
        return dict(zip(TABLE_COLUMNS, values))


def aggregate(reports: Sequence[MetricsReport], track_id: str = "mean") -> MetricsReport:
    """
    Column means over per-track reports. An optional column is averaged only if every report
    carries it.

    :raise: DataError: If ``reports`` is empty
    """
    if not reports:
        raise DataError("Cannot aggregate an empty list of reports")
    values = {}
    for column in _OPTIONAL_COLUMNS:
        column_values = [getattr(report, column) for report in reports]
        values[column] = (
            None if any(v is None for v in column_values) else float(np.mean(column_values))
        )
    for column in ("ssnr_db", "stoi"):
        values[column] = float(np.mean([getattr(report, column) for report in reports]))
    return MetricsReport(track_id=track_id, **values)


def measure(
    clean: Waveform,
    estimate: Waveform,
    reference: Optional[str],
    hypothesis: Optional[str],
    track_id: str = "",
    pesq_scorer: Optional[PesqScorer] = None,
    ssnr_scorer: Optional[SegmentalSnr] = None,
    stoi_settings: Optional[StoiSettings] = None,
    composite_settings: Optional[CompositeSettings] = None,
) -> MetricsReport:
    """
    Scores one enhanced track against its clean reference and the ASR hypothesis. WER is skipped
    with a warning when the reference transcript is missing or has no words.
    """
    ssnr_scorer = ssnr_scorer or SegmentalSnr()
    composite_settings = composite_settings or CompositeSettings.from_config()
    ssnr_db = ssnr_scorer(clean, estimate)
    values = dict(pesq=None, csig=None, cbak=None, covl=None)
    if pesq_scorer is not None:
        pesq_score = pesq_scorer(clean, estimate)
        csig, cbak, covl = composite_measures(
            pesq_score,
            llr(clean, estimate, composite_settings),
            wss(clean, estimate, composite_settings),
            ssnr_db,
        )
        values = dict(pesq=pesq_score, csig=csig, cbak=cbak, covl=covl)
    one_minus_wer = None
    if normalize_text(reference):
        one_minus_wer = 1.0 - wer(reference, hypothesis or "")
    else:
        logger.warning(f"Track {track_id or '?'} has no reference transcript, skipping WER")
    return MetricsReport(
        track_id=track_id,
        ssnr_db=ssnr_db,
        stoi=stoi(clean, estimate, stoi_settings),
        one_minus_wer=one_minus_wer,
        reference=reference,
        hypothesis=hypothesis,
        **values,
    )

