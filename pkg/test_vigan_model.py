import logging
import math

import numpy as np
import pytest

from modules import autodiff as ad
from modules.autodiff import Graph, Tensor, backward
from modules.data import NormalizationStats
from modules.errors import DimensionError, EmptyBatchError, UntrainedModelError, UsageError
from modules.neural_net import DenseLayer, Mlp
from modules.vigan_model import (ArchitectureConfig, LossWeights, ViganModel, build_model, impute, joint_generator_objective, cyclegan_generator_objective,
                                 loss_ae, loss_aegan_x, loss_aegan_y, loss_cyc, loss_cyclegan, loss_dae_pretrain, loss_total, predict_normalized, threshold_binary)

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

SMALL = ArchitectureConfig(generator_hidden=[5], discriminator_hidden=[5], dae_hidden=[6], dae_code=4)


def linear(weight, bias, activation='none', name='net'):
    weight = np.atleast_2d(np.asarray(weight, dtype=np.float64))
    return Mlp([DenseLayer(Tensor(weight), Tensor(np.asarray(bias, dtype=np.float64)), activation)], name=name)


def uniform_discriminator(width, name):
    """Outputs exactly 0.5 for every input."""
    return linear(np.zeros((width, 1)), np.zeros(1), 'sigmoid', name)


def identity_model(dim=1, dae_bias=None):
    """G1 = G2 = identity, D = 0.5, A = identity (or constant when dae_bias is given)."""
    g1 = linear(np.eye(dim), np.zeros(dim), name='g1')
    g2 = linear(np.eye(dim), np.zeros(dim), name='g2')
    if dae_bias is None:
        dae = linear(np.eye(2 * dim), np.zeros(2 * dim), name='dae')
    else:
        dae = linear(np.zeros((2 * dim, 2 * dim)), dae_bias, name='dae')
    return ViganModel(g1, g2, uniform_discriminator(dim, 'd_x'), uniform_discriminator(dim, 'd_y'), dae)


def random_batches(seed, dim_x=3, dim_y=2, n=5):
    rng = np.random.default_rng(seed)
    return rng.uniform(size=(n, dim_x)), rng.uniform(size=(n, dim_y)), rng.uniform(size=(n, dim_x)), rng.uniform(size=(n, dim_y))


def test_build_model_shapes_and_roles():
    model = build_model(3, 2, SMALL, np.random.default_rng(0))
    assert model.dae.input_dim == model.dae.output_dim == 5
    assert model.d_x.output_dim == model.d_y.output_dim == 1
    assert all(net.layers[-1].activation == 'sigmoid' for net in model.networks().values())
    assert model.dae.layer_shapes() == [(5, 6, 'relu'), (6, 4, 'relu'), (4, 6, 'relu'), (6, 5, 'sigmoid')]
    assert model.hyperparams['architecture'] == SMALL.to_dict()
    assert not model.trained


def test_discriminator_outputs_in_unit_interval():
    model = build_model(3, 2, SMALL, np.random.default_rng(1))
    with Graph():
        out = model.d_x(np.random.default_rng(2).normal(size=(20, 3)))
    assert np.all((out.data > 0) & (out.data < 1))


def test_model_rejects_inconsistent_networks():
    good = build_model(3, 2, SMALL, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        ViganModel(good.g1, good.g1, good.d_x, good.d_y, good.dae)


def test_projections():
    model = build_model(2, 1, SMALL, np.random.default_rng(0))
    pair = np.array([[1.0, 2.0, 3.0]])
    assert model.project_x(pair).data.tolist() == [[1.0, 2.0]]
    assert model.project_y(pair).data.tolist() == [[3.0]]
    rebuilt = ad.concat(model.project_x(pair), model.project_y(pair), axis=1)
    np.testing.assert_array_equal(rebuilt.data, pair)
    with pytest.raises(DimensionError):
        model.project_x(np.ones((1, 4)))


def test_projection_gradient_reaches_selected_columns_only():
    model = build_model(2, 1, SMALL, np.random.default_rng(0))
    pair = Tensor(np.array([[1.0, 2.0, 3.0]]), requires_grad=True)
    with Graph():
        backward(ad.sum(ad.square(model.project_x(pair))))
    assert pair.grad.tolist() == [[2.0, 4.0, 0.0]]


def test_loss_ae_perfect_reconstruction_is_zero():
    model = identity_model()
    v = np.array([[0.2], [0.7]])
    with Graph():
        assert loss_ae(model, v, v).item() == 0.0


def test_loss_ae_hand_arithmetic():
    model = identity_model(dae_bias=[1.0, 0.0])
    with Graph():
        value = loss_ae(model, np.array([[1.0]]), np.array([[1.0]])).item()
    assert value == pytest.approx(2.0)


def test_loss_ae_invariant_to_batch_order():
    model = build_model(3, 2, SMALL, np.random.default_rng(3))
    px, py, _, _ = random_batches(4)
    order = np.random.default_rng(5).permutation(len(px))
    with Graph():
        a = loss_ae(model, px, py).item()
        b = loss_ae(model, px[order], py[order]).item()
    assert a == pytest.approx(b, abs=1e-12)
    assert a >= 0


def test_loss_ae_empty_batch():
    model = build_model(3, 2, SMALL, np.random.default_rng(3))
    with pytest.raises(EmptyBatchError):
        loss_ae(model, np.zeros((0, 3)), np.zeros((0, 2)))


def test_dae_pretrain_counts_three_inputs():
    model = identity_model(dae_bias=[1.0, 0.0])
    with Graph():
        value = loss_dae_pretrain(model, np.array([[1.0]]), np.array([[1.0]])).item()
    assert value == pytest.approx(3.0)


def test_uniform_discriminator_adversarial_value():
    model = identity_model()
    x, y = np.array([[0.3], [0.9]]), np.array([[0.1], [0.4]])
    with Graph():
        assert loss_aegan_y(model, x, y).item() == pytest.approx(-2 * math.log(2))
        assert loss_aegan_x(model, x, y).item() == pytest.approx(-1.3863, abs=1e-4)


def test_adversarial_clamp_keeps_loss_finite():
    model = identity_model()
    model.d_y = linear(np.zeros((1, 1)), [1000.0], 'sigmoid', 'd_y')
    with Graph():
        value = loss_aegan_y(model, np.array([[0.5]]), np.array([[0.5]])).item()
    assert math.isfinite(value)
    assert value == pytest.approx(math.log(1 - ad.LOG_CLAMP_EPS) + math.log(ad.LOG_CLAMP_EPS))
    assert 2 * math.log(ad.LOG_CLAMP_EPS) <= value < 0


def test_cycle_loss_values():
    model = identity_model()
    x, y = np.array([[0.3], [0.9]]), np.array([[0.1], [0.4]])
    with Graph():
        assert loss_cyc(model, x, y).item() == 0.0
    model.g1 = linear([[1.0]], [0.5], name='g1')
    with Graph():
        assert loss_cyc(model, x, y).item() == pytest.approx(1.0)


def test_cycle_loss_nonnegative_on_random_models():
    for seed in range(3):
        model = build_model(3, 2, SMALL, np.random.default_rng(seed))
        _, _, x, y = random_batches(seed)
        with Graph():
            assert loss_cyc(model, x, y).item() >= 0


def test_loss_total_without_pairs_drops_reconstruction():
    model = build_model(3, 2, SMALL, np.random.default_rng(6))
    weights = LossWeights(lambda_ae=1.0, lambda_cyc=10.0)
    _, _, x, y = random_batches(7)
    with Graph():
        parts = loss_total(model, weights, np.zeros((0, 3)), np.zeros((0, 2)), x, y)
    assert parts.loss_ae.item() == 0.0
    expected = weights.lambda_cyc * parts.loss_cyc.item() + parts.loss_gan_x.item() + parts.loss_gan_y.item()
    assert parts.total.item() == expected


def test_loss_total_uniform_discriminators_without_weights():
    model = identity_model()
    x, y = np.array([[0.3]]), np.array([[0.8]])
    with Graph():
        total = loss_total(model, LossWeights(0.0, 0.0), x, y, x, y).total.item()
    assert total == pytest.approx(-4 * math.log(2))


def test_loss_total_components_sum_to_total():
    model = build_model(3, 2, SMALL, np.random.default_rng(8))
    weights = LossWeights(lambda_ae=0.7, lambda_cyc=3.0)
    px, py, x, y = random_batches(9)
    with Graph():
        parts = loss_total(model, weights, px, py, x, y).as_dict()
    rebuilt = weights.lambda_ae * parts['loss_ae'] + weights.lambda_cyc * parts['loss_cyc'] + parts['loss_gan_x'] + parts['loss_gan_y']
    assert parts['total'] == pytest.approx(rebuilt, abs=1e-12)


def test_loss_total_needs_unpaired_rows():
    model = build_model(3, 2, SMALL, np.random.default_rng(8))
    with pytest.raises(EmptyBatchError):
        loss_total(model, LossWeights(), None, None, np.zeros((0, 3)), np.zeros((0, 2)))


def test_cyclegan_identity_generators_and_uniform_discriminators():
    model = identity_model()
    x, y = np.array([[0.3], [0.6]]), np.array([[0.2], [0.9]])
    with Graph():
        parts = loss_cyclegan(model, x, y)
    assert parts.loss_cyc.item() == 0.0
    assert parts.total.item() == pytest.approx(-4 * math.log(2))


def test_cyclegan_equals_total_with_pass_through_autoencoder():
    base = build_model(3, 2, SMALL, np.random.default_rng(10))
    model = ViganModel(base.g1, base.g2, base.d_x, base.d_y, linear(np.eye(5), np.zeros(5), name='dae'))
    weights = LossWeights(lambda_ae=0.0, lambda_cyc=10.0)
    _, _, x, y = random_batches(11)
    with Graph():
        cyclegan = loss_cyclegan(model, x, y, weights).total.item()
        total = loss_total(model, weights, None, None, x, y).total.item()
    assert cyclegan == pytest.approx(total, abs=1e-12)


def test_mirror_symmetry_of_total_loss():
    model = build_model(3, 2, SMALL, np.random.default_rng(12))
    mirror = model.mirrored()
    weights = LossWeights(lambda_ae=1.0, lambda_cyc=10.0)
    px, py, x, y = random_batches(13)
    with Graph():
        original = loss_total(model, weights, px, py, x, y).total.item()
        swapped = loss_total(mirror, weights, py, px, y, x).total.item()
    assert (mirror.dim_x, mirror.dim_y) == (2, 3)
    assert swapped == pytest.approx(original, abs=1e-10)


def test_non_saturating_objectives_share_breakdown():
    model = build_model(3, 2, SMALL, np.random.default_rng(14))
    weights = LossWeights()
    px, py, x, y = random_batches(15)
    with Graph():
        minimax, parts = joint_generator_objective(model, weights, px, py, x, y, 'minimax')
        saturating, parts_ns = joint_generator_objective(model, weights, px, py, x, y, 'non_saturating')
        stage2, _ = cyclegan_generator_objective(model, x, y, weights, 'non_saturating')
    assert minimax.item() == parts.total.item()
    assert parts_ns.total.item() == pytest.approx(parts.total.item())
    assert saturating.item() != pytest.approx(minimax.item())
    assert np.isfinite(stage2.item())
    with pytest.raises(UsageError):
        with Graph():
            joint_generator_objective(model, weights, px, py, x, y, 'hinge')


def test_impute_requires_trained_model():
    model = build_model(3, 2, SMALL, np.random.default_rng(16))
    with pytest.raises(UntrainedModelError):
        impute(model, np.zeros((1, 3)))
    assert impute(model, np.zeros((1, 3)), allow_untrained=True).shape == (1, 2)


def test_impute_shapes_determinism_and_routing():
    model = build_model(3, 2, SMALL, np.random.default_rng(17))
    model.trained = True
    rng = np.random.default_rng(18)
    x, y = rng.uniform(size=(4, 3)), rng.uniform(size=(4, 2))
    first = impute(model, x, 'x2y')
    np.testing.assert_array_equal(first, impute(model, x, 'x2y'))
    assert first.shape == (4, 2)
    assert impute(model, x[0], 'x2y').shape == (2,)
    with Graph():
        expected = model.project_x(model.refine_from_y(y)).data
    np.testing.assert_allclose(impute(model, y, 'y2x'), expected, rtol=0, atol=1e-15)
    with Graph():
        raw_g2 = model.g2(y).data
    np.testing.assert_allclose(impute(model, y, 'y2x', path='generator'), raw_g2, rtol=0, atol=1e-15)
    with pytest.raises(DimensionError):
        impute(model, np.zeros((1, 2)), 'x2y')
    with pytest.raises(UsageError):
        impute(model, x, 'sideways')


def test_impute_ignores_discriminator_parameters():
    model = build_model(3, 2, SMALL, np.random.default_rng(23))
    model.trained = True
    rng = np.random.default_rng(24)
    x, y = rng.uniform(size=(6, 3)), rng.uniform(size=(6, 2))
    before = {(direction, path): impute(model, x if direction == 'x2y' else y, direction, path=path) for direction in ('x2y', 'y2x') for path in ('vigan', 'generator', 'dae')}
    for tensor in model.discriminator_params().values():
        tensor.data[...] = rng.normal(scale=5.0, size=tensor.shape)
    for (direction, path), expected in before.items():
        np.testing.assert_array_equal(impute(model, x if direction == 'x2y' else y, direction, path=path), expected)


def test_impute_denormalises_and_thresholds():
    model = build_model(2, 2, SMALL, np.random.default_rng(19))
    model.trained = True
    model.stats = NormalizationStats(np.zeros(2), np.ones(2), np.array([10.0, 0.0]), np.array([5.0, 1.0]))
    model.y_binary = (False, True)
    out = impute(model, np.random.default_rng(20).uniform(size=(6, 2)), 'x2y')
    assert np.all((out[:, 0] >= 10.0) & (out[:, 0] <= 15.0))
    assert set(np.unique(out[:, 1])) <= {0.0, 1.0}


def test_mirrored_model_imputes_the_other_way():
    model = build_model(3, 2, SMALL, np.random.default_rng(21))
    mirror = model.mirrored()
    x = np.random.default_rng(22).uniform(size=(5, 3))
    np.testing.assert_allclose(predict_normalized(mirror, x, 'y2x'), predict_normalized(model, x, 'x2y'), atol=1e-12)


def test_threshold_binary_rounds_ties_up():
    out = threshold_binary(np.array([[0.5, 0.49, 0.7]]), [True, True, False])
    assert out.tolist() == [[1.0, 0.0, 0.7]]


def test_loss_weights_validation():
    with pytest.raises(UsageError):
        LossWeights(lambda_ae=-1.0)
    assert LossWeights.from_dict({'lambda_cyc': 5}).lambda_cyc == 5.0
