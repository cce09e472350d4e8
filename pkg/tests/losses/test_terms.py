import math

import pytest
import torch

from src.core.constants import ModelFamily
from src.core.exceptions import LossConfigError, ProbabilityDomainError, ShapeError
from src.losses.terms import adv_loss, feature_loss, l1_tf, l1_time
from src.models.provider import build_model
from src.models.spec import default_spec


def test_perfect_discriminator_objective_is_zero():
    assert float(adv_loss(1.0, 0.0).discriminator) == 0.0


def test_undecided_discriminator_objective():
    objectives = adv_loss(0.5, 0.5)
    assert float(objectives.discriminator) == pytest.approx(2 * math.log(0.5), abs=1e-4)
    assert float(objectives.discriminator) == pytest.approx(-1.3863, abs=1e-4)
    assert float(objectives.discriminator_loss) == pytest.approx(1.3863, abs=1e-4)


def test_generator_loss_falls_as_the_discriminator_is_fooled():
    values = [float(adv_loss(0.9, d_fake).generator) for d_fake in (0.1, 0.5, 0.9)]
    assert values[0] > values[1] > values[2]


def test_adversarial_loss_is_batch_mean():
    d_real = torch.tensor([0.9, 0.6])
    d_fake = torch.tensor([0.2, 0.4])
    batch = float(adv_loss(d_real, d_fake).discriminator)
    items = [float(adv_loss(r, f).discriminator) for r, f in zip(d_real, d_fake)]
    assert batch == pytest.approx(sum(items) / 2, rel=1e-6)


def test_probabilities_outside_unit_interval_are_rejected():
    with pytest.raises(ProbabilityDomainError):
        adv_loss(1.2, 0.0)
    with pytest.raises(ProbabilityDomainError):
        adv_loss(0.5, -0.1)


def test_least_squares_mode():
    objectives = adv_loss(1.0, 0.0, "least_squares")
    assert float(objectives.discriminator) == 0.0
    assert float(objectives.generator) == pytest.approx(0.5)


def test_l1_time_values():
    assert float(l1_time(torch.tensor([1.0, 2.0]), torch.tensor([0.0, 0.0]))) == 1.5
    x = torch.randn(100)
    y = torch.randn(100)
    assert float(l1_time(x, x)) == 0.0
    assert float(l1_time(x, y)) == pytest.approx(float(l1_time(y, x)))
    with pytest.raises(ShapeError):
        l1_time(torch.zeros(10), torch.zeros(11))


def test_l1_time_mask_averages_real_samples_only():
    x = torch.tensor([[1.0, 1.0, 5.0]])
    y = torch.zeros(1, 3)
    mask = torch.tensor([[True, True, False]])
    assert float(l1_time(x, y, mask)) == 1.0


def test_l1_tf_constant_offset():
    x_m = torch.rand(1, 1, 256, 256, dtype=torch.float64)
    assert float(l1_tf(x_m, x_m + 0.25)) == pytest.approx(0.25)
    y_m = torch.rand(1, 1, 256, 256, dtype=torch.float64)
    assert float(l1_tf(x_m, y_m)) == pytest.approx(float(torch.mean(torch.abs(x_m - y_m))))
    with pytest.raises(ShapeError):
        l1_tf(x_m, x_m[..., :128])


def test_feature_loss_with_a_single_layer():
    extractor = lambda x: [x]  # noqa: E731
    x_m = torch.zeros(4, 4)
    x_hat_m = torch.full((4, 4), 0.5)
    assert float(feature_loss(x_m, x_hat_m, extractor, [1.0])) == pytest.approx(0.5)
    assert float(feature_loss(x_m, x_hat_m, extractor, [2.0])) == pytest.approx(1.0)
    with pytest.raises(LossConfigError):
        feature_loss(x_m, x_hat_m, extractor, [0.5, 0.5])


def test_feature_loss_of_identical_inputs_is_zero():
    discriminator = build_model(default_spec(ModelFamily.DISC1D, depth=3), 0)
    x = torch.rand(1, 1, 2000)
    condition = torch.rand(1, 1, 2000)
    value = feature_loss(x, x, discriminator, [1 / 3] * 3, condition=condition)
    assert float(value) == 0.0
    assert float(feature_loss(x, condition, discriminator, [1 / 3] * 3, condition)) > 0
    with pytest.raises(LossConfigError):
        feature_loss(x, x, discriminator, [1 / 3] * 3)


def test_feature_loss_gradient_reaches_the_enhanced_input_only():
    discriminator = build_model(default_spec(ModelFamily.DISC1D, depth=2), 0)
    x = torch.rand(1, 1, 2000, requires_grad=True)
    x_hat = torch.rand(1, 1, 2000, requires_grad=True)
    feature_loss(x, x_hat, discriminator, [0.5, 0.5], condition=torch.rand(1, 1, 2000)).backward()
    assert x.grad is None
    assert x_hat.grad is not None
