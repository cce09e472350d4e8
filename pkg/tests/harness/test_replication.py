import numpy as np
import pytest

from src.core.constants import Framework
from src.harness.config import RunConfig
from src.harness.pipeline import enhance_run, evaluate_run
from src.harness.trainer import train
from src.metrics.asr.client import LocalAsrClient
from tests.helpers import TINY

SEEDS = (0, 1, 2)


def _mean_score(framework: Framework, metric: str, manifest_path: str, root) -> float:
    scores = []
    for seed in SEEDS:
        run_dir = str(root / f"{framework.value}_{seed}")
        cfg = RunConfig.parse(
            {
                "framework": framework.value,
                "manifest": manifest_path,
                "snr_list": [0.0],
                "seed": seed,
                "epochs": 10,
                "batch_size": 2,
                "learning_rate": 1e-3,
                **TINY[framework],
            }
        )
        train(cfg, run_dir)
        enhance_run(run_dir)
        record = evaluate_run(run_dir, asr_client=LocalAsrClient())
        scores.append(getattr(record.aggregates["0"], metric))
    return float(np.mean(scores))


@pytest.mark.slow
@pytest.mark.parametrize(
    "single, cross, metric",
    [
        (Framework.WAVENET, Framework.CD_WAVENET, "stoi"),
        (Framework.AEGAN, Framework.CD_AEGAN, "ssnr_db"),
    ],
)
def test_cross_domain_loss_does_not_hurt_at_zero_db(
    single, cross, metric, manifest_path, tmp_path
):
    baseline = _mean_score(single, metric, manifest_path, tmp_path)
    assert _mean_score(cross, metric, manifest_path, tmp_path) >= baseline
