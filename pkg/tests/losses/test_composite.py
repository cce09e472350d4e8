import numpy as np
import pytest
import torch

from src.core.audio.stft import istft_tensor, plan_stft, stft
from src.core.constants import DomainBridge, Framework, LossKind, ModelFamily
from src.core.exceptions import (
    CalibrationError,
    IllegalCombinationError,
    LossConfigError,
    MissingPhaseError,
)
from src.losses.composite import (
    CalibrationTarget,
    GeneratorBatch,
    LossConfig,
    LossTerm,
    calibrate_equal_importance,
    compose_cd_aegan,
    compose_cd_wavenet,
    compose_generator_loss,
    default_loss_config,
)
from src.models.provider import build_model
from src.models.spec import default_spec
from tests.helpers import finite_difference_check, white_noise

SCALE = 5.55


def _cd_wavenet_config(w_t=1.0, w_f=1.0) -> LossConfig:
    return LossConfig(
        terms=[
            LossTerm(kind=LossKind.L1_TIME, weight=w_t),
            LossTerm(kind=LossKind.L1_TF, weight=w_f, bridge=DomainBridge.STFT),
        ]
    )


def _istft_only_config() -> LossConfig:
    return LossConfig(
        terms=[LossTerm(kind=LossKind.L1_TIME, bridge=DomainBridge.ISTFT_WITH_NOISY_PHASE)]
    )


@pytest.fixture
def time_pair():
    x = torch.randn(8000, dtype=torch.float64, generator=torch.Generator().manual_seed(0))
    return x, 1.5 * x


@pytest.fixture
def embedded_track():
    """Compressed magnitude [1, 1, 256, 256], phase [1, 256, 256], samples [1, n] and the plan."""
    waveform = white_noise(16000, seed=11)
    tf = stft(waveform).compress(SCALE)
    return (
        tf.magnitude.reshape(1, 1, 256, 256),
        tf.phase.reshape(1, 256, 256),
        waveform.samples.reshape(1, -1),
        tf.plan,
    )


def test_cd_wavenet_without_tf_weight_is_plain_l1(time_pair):
    x, x_hat = time_pair
    value = compose_cd_wavenet(x, x_hat, _cd_wavenet_config(w_f=0.0))
    assert float(value.total) == pytest.approx(float(torch.mean(torch.abs(x - x_hat))))
    assert value.raw(LossKind.L1_TF) > 0


def test_cd_wavenet_of_perfect_estimate_is_zero(time_pair):
    x, _ = time_pair
    value = compose_cd_wavenet(x, x.clone(), _cd_wavenet_config())
    assert float(value.total) == 0.0


def test_cd_wavenet_gradient_matches_finite_differences(time_pair):
    x, x_hat = time_pair
    cfg = _cd_wavenet_config(w_t=1.0, w_f=0.05)
    plan = plan_stft(8000)
    indices = np.random.default_rng(0).choice(8000, size=10, replace=False)
    error = finite_difference_check(
        lambda estimate: compose_cd_wavenet(x, estimate, cfg, plan).total, x_hat, indices
    )
    assert error < 1e-4


def test_cd_wavenet_rejects_tf_bridges(time_pair):
    x, x_hat = time_pair
    with pytest.raises(IllegalCombinationError):
        compose_cd_wavenet(x, x_hat, _istft_only_config())


def test_cd_aegan_without_time_weight_is_the_aegan_loss(embedded_track):
    x_m, y_p, x_time, plan = embedded_track
    discriminator = build_model(default_spec(ModelFamily.DISC2D, depth=2, base_channels=4), 1)
    discriminator = discriminator.double().eval()
    y_m = (x_m + 0.05 * torch.rand_like(x_m)).clamp(min=0)
    x_hat_m = (x_m + 0.02 * torch.randn_like(x_m)).clamp(min=0)

    cd = default_loss_config(Framework.CD_AEGAN).with_weights({LossKind.L1_TIME: 0.0})
    value = compose_cd_aegan(x_m, x_hat_m, y_p, x_time, cd, discriminator, y_m, plan, SCALE)
    plain = compose_cd_aegan(
        x_m,
        x_hat_m,
        y_p,
        x_time,
        default_loss_config(Framework.AEGAN),
        discriminator,
        y_m,
        plan,
        SCALE,
    )
    assert float(value.total) == pytest.approx(float(plain.total), rel=1e-9)
    assert value.raw(LossKind.L1_TIME) > 0


def test_cd_aegan_round_trip_of_the_clean_embedding(embedded_track):
    x_m, y_p, x_time, plan = embedded_track
    cfg = LossConfig(
        terms=[
            LossTerm(kind=LossKind.L1_TF),
            LossTerm(kind=LossKind.L1_TIME, bridge=DomainBridge.ISTFT_WITH_NOISY_PHASE),
        ]
    )
    value = compose_cd_aegan(x_m, x_m.clone(), y_p, x_time, cfg, plan=plan, scale=SCALE)
    assert value.raw(LossKind.L1_TF) == 0.0
    assert value.raw(LossKind.L1_TIME) < 1e-6


def test_cd_aegan_needs_the_noisy_phase(embedded_track):
    x_m, _, x_time, plan = embedded_track
    with pytest.raises(MissingPhaseError):
        compose_cd_aegan(x_m, x_m, None, x_time, _istft_only_config(), plan=plan, scale=SCALE)


def test_istft_bridge_gradient_matches_finite_differences(embedded_track):
    x_m, y_p, _, plan = embedded_track
    torch.manual_seed(0)
    x_hat_m = (x_m + 0.01 * torch.randn_like(x_m)).clamp(min=0)
    magnitude = torch.expm1(SCALE * x_hat_m).reshape(1, 256, 256)
    reconstructed = istft_tensor(magnitude, y_p, plan)
    # A target offset by +-0.5 keeps every sample away from the kink of the absolute value.
    signs = torch.from_numpy(np.random.default_rng(1).choice([-1.0, 1.0], size=plan.original_length))
    target = reconstructed + 0.5 * signs
    cfg = _istft_only_config()
    indices = torch.topk(x_hat_m.reshape(-1), 10).indices.tolist()
    error = finite_difference_check(
        lambda estimate: compose_cd_aegan(
            x_m, estimate, y_p, target, cfg, plan=plan, scale=SCALE
        ).total,
        x_hat_m,
        indices,
    )
    assert error < 1e-4


def test_adversarial_terms_need_a_discriminator(embedded_track):
    x_m, y_p, x_time, plan = embedded_track
    with pytest.raises(LossConfigError):
        compose_cd_aegan(
            x_m, x_m, y_p, x_time, default_loss_config(Framework.CD_AEGAN), plan=plan
        )


def test_calibration_equalizes_the_two_domains():
    cfg = default_loss_config(Framework.CD_WAVENET)
    calibrated = calibrate_equal_importance(cfg, {LossKind.L1_TIME: 2.0, LossKind.L1_TF: 0.5})
    assert calibrated.weight(LossKind.L1_TIME) == pytest.approx(0.5)
    assert calibrated.weight(LossKind.L1_TF) == pytest.approx(2.0)
    assert calibrated.calibrated
    assert calibrated.calibration_means == {"l1_time": 2.0, "l1_tf": 0.5}

    equal = calibrate_equal_importance(cfg, {"l1_time": 0.3, "l1_tf": 0.3})
    assert equal.weight(LossKind.L1_TIME) == pytest.approx(equal.weight(LossKind.L1_TF))


def test_calibration_against_the_baseline_term():
    cfg = LossConfig(
        terms=default_loss_config(Framework.CD_WAVENET).terms,
        calibration_target=CalibrationTarget.BASELINE,
    )
    calibrated = calibrate_equal_importance(cfg, {LossKind.L1_TIME: 2.0, LossKind.L1_TF: 0.5})
    assert calibrated.weight(LossKind.L1_TIME) == 1.0
    assert calibrated.weight(LossKind.L1_TF) == pytest.approx(4.0)


def test_calibration_from_loss_values(time_pair):
    x, x_hat = time_pair
    cfg = default_loss_config(Framework.CD_WAVENET)
    values = [compose_cd_wavenet(x, x_hat, cfg)]
    calibrated = calibrate_equal_importance(cfg, values)
    weighted = compose_cd_wavenet(x, x_hat, calibrated)
    time_part = weighted.per_term[LossKind.L1_TIME][1]
    tf_part = weighted.per_term[LossKind.L1_TF][1]
    assert float(time_part) == pytest.approx(1.0)
    assert float(tf_part) == pytest.approx(1.0)


def test_calibration_of_a_silent_batch_fails():
    cfg = default_loss_config(Framework.CD_WAVENET)
    with pytest.raises(CalibrationError):
        calibrate_equal_importance(cfg, {LossKind.L1_TIME: 0.0, LossKind.L1_TF: 0.0})


def test_loss_config_validation():
    with pytest.raises(LossConfigError):
        LossConfig.parse({"terms": [{"kind": "l1_time"}, {"kind": "l1_time"}]})
    with pytest.raises(LossConfigError):
        LossConfig.parse({"terms": []})
    with pytest.raises(LossConfigError):
        LossConfig.parse({"terms": [{"kind": "l1_time", "weight": -1}]})
    with pytest.raises(IllegalCombinationError):
        default_loss_config(Framework.CD_WAVENET).check_wiring("tf")
    with pytest.raises(IllegalCombinationError):
        LossConfig.parse({"terms": [{"kind": "adv", "bridge": "stft"}]}).check_wiring("time")


def test_default_wiring_per_framework():
    assert default_loss_config(Framework.WIENER) is None
    segan = default_loss_config(Framework.SEGAN)
    assert segan.weight(LossKind.L1_TIME) == 100.0
    assert segan.weight(LossKind.ADV) == 1.0
    cd_aegan = default_loss_config(Framework.CD_AEGAN)
    assert cd_aegan.term(LossKind.L1_TIME).bridge == DomainBridge.ISTFT_WITH_NOISY_PHASE
    assert [term.kind for term in cd_aegan.bridged_terms] == [LossKind.L1_TIME]
    cd_aegan.check_wiring("tf")


def test_composite_value_record(time_pair):
    x, x_hat = time_pair
    value = compose_generator_loss(
        default_loss_config(Framework.WAVENET),
        GeneratorBatch(clean_time=x, enhanced_time=x_hat),
    )
    record = value.as_record()
    assert set(record) == {"total", "l1_time_raw", "l1_time_weighted"}
    assert record["total"] == pytest.approx(record["l1_time_weighted"])
