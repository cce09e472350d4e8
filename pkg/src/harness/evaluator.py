from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

from src.core.audio.waveform import Waveform
from src.core.exceptions import AlignmentError
from src.core.utils.logging import ServiceLogger
from src.data.mixing import TrackPair
from src.metrics.asr.client import AsrClient, AsrClientProvider
from src.metrics.composite import CompositeSettings
from src.metrics.pesq import PesqScorer
from src.metrics.report import MetricsReport, aggregate, measure
from src.metrics.ssnr import SegmentalSnr
from src.metrics.stoi import StoiSettings

logger = ServiceLogger(__name__)


@dataclass
class EvaluationResult:
    reports: List[MetricsReport]
    aggregate: MetricsReport


class Evaluator:
    """
    Scores enhanced tracks against the clean references of their pairs. Transcripts come from the
    ASR client in one order-preserving batch; the remaining metrics run per track on ``workers``
    threads.
    """

    def __init__(
        self,
        asr_client: Optional[AsrClient] = None,
        pesq_scorer: Optional[PesqScorer] = None,
        workers: int = 1,
    ):
        self.asr_client = asr_client or AsrClientProvider.build()
        self.pesq_scorer = pesq_scorer
        self.workers = max(1, workers)
        self.ssnr = SegmentalSnr()
        self.stoi_settings = StoiSettings.from_config()
        self.composite_settings = CompositeSettings.from_config()

    @staticmethod
    def check_alignment(enhanced: Sequence[Waveform], references: Sequence[TrackPair]):
        """
        :raise: AlignmentError: If the lists differ in size or a track differs from its reference
            in length
        """
        if len(enhanced) != len(references):
            raise AlignmentError(
                f"{len(enhanced)} enhanced tracks for {len(references)} references"
            )
        for track, reference in zip(enhanced, references):
            if track.n != reference.n:
                raise AlignmentError(
                    f"Track {reference.track_id}: {track.n} enhanced samples, "
                    f"{reference.n} reference samples"
                )

    def evaluate(
        self, enhanced: Sequence[Waveform], references: Sequence[TrackPair]
    ) -> EvaluationResult:
        self.check_alignment(enhanced, references)
        if any(reference.transcript for reference in references):
            hypotheses = self.asr_client.transcribe_batch(list(enhanced))
        else:
            logger.warning("No reference transcripts, skipping ASR and WER")
            hypotheses = [None] * len(enhanced)

        def score(index: int) -> MetricsReport:
            reference = references[index]
            return measure(
                reference.clean,
                enhanced[index],
                reference.transcript,
                hypotheses[index],
                track_id=reference.track_id,
                pesq_scorer=self.pesq_scorer,
                ssnr_scorer=self.ssnr,
                stoi_settings=self.stoi_settings,
                composite_settings=self.composite_settings,
            )

        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            reports = list(executor.map(score, range(len(references))))
        result = EvaluationResult(reports, aggregate(reports))
        row = result.aggregate
        one_minus_wer = "-" if row.one_minus_wer is None else f"{100 * row.one_minus_wer:.1f}%"
        logger.info(
            f"Evaluated {len(reports)} tracks: SSNR {row.ssnr_db:.2f} dB, "
            f"STOI {row.stoi_percent:.1f}%, 1-WER {one_minus_wer}"
        )
        return result


def evaluate(
    enhanced: Sequence[Waveform],
    references: Sequence[TrackPair],
    asr_client: Optional[AsrClient] = None,
    pesq_scorer: Optional[PesqScorer] = None,
    workers: int = 1,
) -> EvaluationResult:
    return Evaluator(asr_client, pesq_scorer, workers).evaluate(enhanced, references)
