import numpy as np
import pytest
from pydantic import ValidationError

from src.fae.autoencoder import (
    FaeModel,
    FaeObjective,
    ForwardResult,
    encode,
    feature_layer,
    feature_matrix,
    forward,
    forward_dataset,
    input_weight_functions,
    output_weight_functions,
    penalized_loss,
    second_differences,
    smooth,
    train,
)
from src.fae.basis import basis_values, bspline, design_matrix, evaluate, gram_matrix
from src.fae.data import FunctionalDataset, FunctionalSample
from src.fae.errors import ArgumentError, ConfigError, DomainError, EvaluationError, TrainingFailure
from src.fae.nncore import DenseLayer, Network
from src.fae.quadrature import trapezoid_weights
from src.fae.schemas import Activation, FaeConfig, OptimizerConfig, OptimizerKind

ACTIVATIONS = [Activation.IDENTITY, Activation.SIGMOID, Activation.SOFTPLUS]


def linear_model(basis, input_projection, coefficient_layer):
    config = FaeConfig(
        input_basis=basis, output_basis=basis,
        hidden_sizes=[input_projection.shape[0]], activation=Activation.IDENTITY,
    )
    return FaeModel(config, Network([
        DenseLayer(input_projection, None, Activation.IDENTITY, "input_projection"),
        DenseLayer(coefficient_layer, None, Activation.IDENTITY, "coefficients"),
    ]))


def random_model(seed=0, activation=Activation.SIGMOID, hidden=(4,), m_in=6, m_out=6, sigma=0.5, **kw):
    config = FaeConfig(
        input_basis=bspline(m_in), output_basis=bspline(m_out), hidden_sizes=list(hidden),
        activation=activation, init_sigma=sigma, **kw,
    )
    return FaeModel.initialize(config, np.random.default_rng(seed))


def random_irregular(rng, n=3):
    samples = []
    for i in range(n):
        interior = np.sort(rng.uniform(0.02, 0.98, size=int(rng.integers(3, 8))))
        times = np.concatenate([[0.0], interior, [1.0]])
        samples.append(FunctionalSample(times, rng.normal(size=times.size), sample_id=f"r{i}"))
    return FunctionalDataset(samples)


# ==================== Feature layer ====================

def test_zero_curve_gives_zero_features(grid21):
    f = feature_layer(FunctionalSample(grid21, np.zeros(21)), bspline(8))
    np.testing.assert_array_equal(f, 0.0)


def test_constant_curve_features_sum_to_domain_length(rng):
    times = np.sort(np.concatenate([[0.1, 0.9], rng.uniform(0.1, 0.9, 10)]))
    f = feature_layer(FunctionalSample(times, np.ones(times.size)), bspline(8))
    assert f.sum() == pytest.approx(times[-1] - times[0], abs=1e-12)


def test_basis_function_features_match_gram_column():
    basis = bspline(6)
    times = np.linspace(0.0, 1.0, 201)
    sample = FunctionalSample(times, basis_values(basis, times)[:, 1])
    gram = gram_matrix(basis, 10001)
    assert np.max(np.abs(feature_layer(sample, basis) - gram[:, 1])) < 1e-4


def test_feature_matrix_matches_per_sample(rng):
    dataset = random_irregular(rng, n=5)
    basis = bspline(7)
    expected = np.stack([feature_layer(s, basis) for s in dataset])
    np.testing.assert_allclose(feature_matrix(dataset, basis), expected, atol=1e-14)


def test_removing_points_changes_features_by_quadrature_error():
    basis = bspline(8)
    fine = np.linspace(0.0, 1.0, 401)
    kept = np.delete(fine, np.arange(1, 400, 7))
    curve = lambda t: np.sin(2 * np.pi * t) + t ** 2
    full = feature_layer(FunctionalSample(fine, curve(fine)), basis)
    thinned = feature_layer(FunctionalSample(kept, curve(kept)), basis)
    assert np.max(np.abs(full - thinned)) < 1e-3


# ==================== Forward ====================

def test_zero_model_reconstructs_zero(grid21, rng):
    model = random_model(activation=Activation.IDENTITY)
    for p in model.parameters():
        p[...] = 0.0
    result = forward(model, FunctionalSample(grid21, rng.normal(size=21)))
    np.testing.assert_array_equal(result.coefficients, 0.0)
    np.testing.assert_array_equal(result.reconstruction, 0.0)


def test_projector_weights_reproduce_weighted_least_squares(grid21, rng):
    basis = bspline(6)
    phi = design_matrix(basis, grid21)
    w = trapezoid_weights(grid21).weights
    projector = np.linalg.inv(phi.T @ (phi * w[:, None]))
    model = linear_model(basis, projector, np.eye(6))

    values = np.sin(3 * grid21) + 0.1 * rng.normal(size=21)
    root = np.sqrt(w)
    coeffs, *_ = np.linalg.lstsq(phi * root[:, None], values * root, rcond=None)
    result = forward(model, FunctionalSample(grid21, values))
    np.testing.assert_allclose(result.reconstruction, phi @ coeffs, atol=1e-10)


def test_reconstruction_is_design_matrix_times_coefficients(rng):
    model = random_model(seed=4, hidden=(5, 3, 5))
    sample = random_irregular(rng, n=1)[0]
    result = forward(model, sample)
    expected = design_matrix(model.config.output_basis, sample.times) @ result.coefficients
    np.testing.assert_allclose(result.reconstruction, expected, atol=1e-12)
    assert result.representation.shape == (3,)


def test_forward_dataset_matches_single_forward(rng):
    model = random_model(seed=2, activation=Activation.SOFTPLUS)
    dataset = random_irregular(rng, n=4)
    batch = forward_dataset(model, dataset)
    for i, sample in enumerate(dataset):
        single = forward(model, sample)
        np.testing.assert_allclose(batch.representation[i], single.representation, atol=1e-14)
        np.testing.assert_allclose(dataset.split_long(batch.reconstruction)[i], single.reconstruction, atol=1e-13)


def test_non_finite_layer_is_named(grid21):
    model = random_model()
    model.network.layers[0].weight[0, 0] = np.nan
    with pytest.raises(EvaluationError) as info:
        forward(model, FunctionalSample(grid21, np.ones(21)))
    assert info.value.layer == "input_projection"


def test_identity_model_is_linear(grid21, rng):
    model = random_model(seed=9, activation=Activation.IDENTITY, hidden=(3,))
    x1, x2 = rng.normal(size=21), rng.normal(size=21)
    r1 = forward(model, FunctionalSample(grid21, x1)).reconstruction
    r2 = forward(model, FunctionalSample(grid21, x2)).reconstruction
    combined = forward(model, FunctionalSample(grid21, 2.0 * x1 - 0.5 * x2)).reconstruction
    np.testing.assert_allclose(combined, 2.0 * r1 - 0.5 * r2, atol=1e-10)


def test_reconstruction_lies_in_output_span(rng):
    model = random_model(seed=1, m_out=7)
    sample = random_irregular(rng, n=1)[0]
    fine = np.linspace(0.0, 1.0, 50)
    curve = smooth(model, sample, fine)
    phi = design_matrix(model.config.output_basis, fine)
    coeffs, *_ = np.linalg.lstsq(phi, curve, rcond=None)
    assert np.max(np.abs(phi @ coeffs - curve)) < 1e-10


# ==================== Encode / smooth ====================

def test_zero_model_encodes_to_zero(grid21, rng):
    model = random_model(activation=Activation.IDENTITY)
    for p in model.parameters():
        p[...] = 0.0
    np.testing.assert_array_equal(encode(model, FunctionalSample(grid21, rng.normal(size=21))), 0.0)


def test_identical_samples_identical_representations(grid21):
    model = random_model(seed=5)
    values = np.cos(grid21)
    a = encode(model, FunctionalSample(grid21, values))
    b = encode(model, FunctionalSample(grid21.copy(), values.copy()))
    np.testing.assert_array_equal(a, b)


def test_representation_grid_invariance():
    model = random_model(seed=6, hidden=(5,))
    curve = lambda t: np.sin(2 * np.pi * t) + 0.5 * t
    fine = np.linspace(0.0, 1.0, 101)
    coarse = np.linspace(0.0, 1.0, 51)
    a = encode(model, FunctionalSample(fine, curve(fine)))
    b = encode(model, FunctionalSample(coarse, curve(coarse)))
    assert np.max(np.abs(a - b)) < 0.05


def test_smooth_at_observed_times_equals_reconstruction(rng):
    model = random_model(seed=3)
    sample = random_irregular(rng, n=1)[0]
    np.testing.assert_array_equal(smooth(model, sample, sample.times), forward(model, sample).reconstruction)


def test_smooth_between_observations_matches_basis_sum(rng):
    model = random_model(seed=3)
    sample = random_irregular(rng, n=1)[0]
    mid = 0.5 * (sample.times[0] + sample.times[1])
    b = forward(model, sample).coefficients
    expected = b @ evaluate(model.config.output_basis, mid)
    assert smooth(model, sample, [mid])[0] == pytest.approx(expected, abs=1e-12)


def test_smooth_rejects_out_of_domain(grid21):
    model = random_model()
    with pytest.raises(DomainError):
        smooth(model, FunctionalSample(grid21, np.ones(21)), [1.2])


def test_weight_functions(rng):
    model = random_model(seed=8, hidden=(4, 2, 3))
    times = np.linspace(0.0, 1.0, 31)
    w_in = input_weight_functions(model, times)
    w_out = output_weight_functions(model, times)
    assert w_in.shape == (31, 4)
    assert w_out.shape == (31, 3)
    np.testing.assert_allclose(w_in, basis_values(model.config.input_basis, times) @ model.input_coeffs.T)
    np.testing.assert_allclose(w_out[:, 1], basis_values(model.config.output_basis, times) @ model.output_coeffs[:, 1])


# ==================== Loss ====================

def test_perfect_reconstruction_zero_loss(grid21):
    sample = FunctionalSample(grid21, np.sin(grid21))
    result = ForwardResult(np.zeros(2), np.zeros(5), sample.values.copy())
    assert penalized_loss([sample], [result], 0.0) == 0.0


def test_affine_coefficients_have_no_penalty():
    b = 0.3 + 1.7 * np.arange(8)
    np.testing.assert_allclose(second_differences(b), 0.0, atol=1e-12)


def test_hand_computed_penalized_loss():
    sample = FunctionalSample([0.0, 1.0], [1.0, -1.0])
    result = ForwardResult(np.zeros(1), np.array([0.0, 0.0, 1.0]), np.zeros(2))
    assert penalized_loss([sample], [result], 2.0) == pytest.approx(4.0)


def test_penalty_needs_three_coefficients():
    sample = FunctionalSample([0.0, 1.0], [1.0, -1.0])
    result = ForwardResult(np.zeros(1), np.array([0.0, 1.0]), np.zeros(2))
    with pytest.raises(ConfigError):
        penalized_loss([sample], [result], 1.0)


def test_objective_matches_penalized_loss(rng):
    model = random_model(seed=11, lam=5.0)
    dataset = random_irregular(rng, n=4)
    loss, _ = FaeObjective(model, dataset)()
    expected = penalized_loss(list(dataset), [forward(model, s) for s in dataset], 5.0)
    assert loss == pytest.approx(expected, rel=1e-12)


def _finite_difference_check(model, dataset, step=1e-5):
    objective = FaeObjective(model, dataset)
    _, analytic = objective()
    numeric = []
    for p in model.parameters():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            original = p[idx]
            p[idx] = original + step
            plus = objective()[0]
            p[idx] = original - step
            minus = objective()[0]
            p[idx] = original
            g[idx] = (plus - minus) / (2 * step)
        numeric.append(g)
    a = np.concatenate([g.ravel() for g in analytic])
    n = np.concatenate([g.ravel() for g in numeric])
    return np.max(np.abs(a - n)) / max(np.max(np.abs(n)), 1e-6)


def _random_gradient_case(rng, max_basis=7):
    depth = int(rng.integers(1, 4))
    hidden = [int(k) for k in rng.integers(2, 5, size=depth)]
    config = FaeConfig(
        input_basis=bspline(int(rng.integers(4, max_basis + 1))),
        output_basis=bspline(int(rng.integers(4, max_basis + 1))),
        hidden_sizes=hidden,
        representation_index=0 if depth % 2 == 0 else None,
        activation=ACTIVATIONS[int(rng.integers(3))],
        lam=[0.0, 5.0][int(rng.integers(2))],
        init_sigma=0.5,
    )
    return FaeModel.initialize(config, rng), random_irregular(rng, n=3)


def test_end_to_end_gradient_check(rng):
    for _ in range(12):
        model, dataset = _random_gradient_case(rng)
        assert _finite_difference_check(model, dataset) < 1e-5


@pytest.mark.slow
def test_end_to_end_gradient_check_many_configurations():
    rng = np.random.default_rng(100)
    for _ in range(100):
        model, dataset = _random_gradient_case(rng, max_basis=10)
        assert _finite_difference_check(model, dataset) < 1e-5


def test_minibatch_gradients_cover_only_batch(rng):
    model = random_model(seed=12)
    dataset = random_irregular(rng, n=5)
    objective = FaeObjective(model, dataset)
    loss_sub, grads_sub = objective(np.array([3, 1]))
    loss_ref, grads_ref = FaeObjective(model, dataset.subset([3, 1]))()
    assert loss_sub == pytest.approx(loss_ref, rel=1e-13)
    for a, b in zip(grads_sub, grads_ref):
        np.testing.assert_allclose(a, b, atol=1e-13)


# ==================== Training ====================

def test_identical_curves_are_learned(grid21, curves_factory):
    basis = bspline(6)
    coeffs = np.tile(np.array([[0.5, -1.0, 2.0, 0.0, 1.0, -0.5]]), (8, 1))
    dataset = curves_factory(coeffs, grid21, basis=basis)
    config = FaeConfig(
        input_basis=basis, output_basis=basis, hidden_sizes=[2], activation=Activation.IDENTITY,
        epochs=500, batch_size=None, init_sigma=0.5, optimizer=OptimizerConfig(learning_rate=0.05),
    )
    result = train(dataset, config)
    recon = forward_dataset(result.model, dataset).reconstruction
    mse = np.mean((recon - dataset.values) ** 2)
    assert mse < 1e-4 * np.var(dataset.values)
    assert result.history[-1] < result.history[0]


def test_training_is_deterministic(regular_dataset, small_fae_config):
    first = train(regular_dataset, small_fae_config)
    second = train(regular_dataset, small_fae_config)
    assert first.history == second.history
    for a, b in zip(first.model.parameters(), second.model.parameters()):
        np.testing.assert_array_equal(a, b)


def test_seed_changes_initialization(regular_dataset, small_fae_config):
    first = train(regular_dataset, small_fae_config)
    other = train(regular_dataset, small_fae_config.model_copy(update={"seed": 4}))
    assert not np.array_equal(first.model.input_coeffs, other.model.input_coeffs)


def test_training_reports_each_epoch(regular_dataset, small_fae_config):
    seen = []
    train(regular_dataset, small_fae_config, on_epoch_end=lambda epoch, loss, model: seen.append((epoch, model)))
    assert [e for e, _ in seen] == [1, 2, 3, 4, 5]
    assert all(isinstance(m, FaeModel) for _, m in seen)


def test_empty_dataset_rejected():
    with pytest.raises(ArgumentError):
        FunctionalDataset([])


def test_training_rejects_out_of_domain_data(regular_dataset):
    config = FaeConfig(input_basis=bspline(6, domain=(0.0, 0.5)), output_basis=bspline(6), epochs=1)
    with pytest.raises(DomainError):
        train(regular_dataset, config)


def test_divergence_is_reported(regular_dataset):
    config = FaeConfig(
        input_basis=bspline(6), output_basis=bspline(6), hidden_sizes=[3],
        activation=Activation.IDENTITY, epochs=50, batch_size=None, init_sigma=1.0,
        optimizer=OptimizerConfig(kind=OptimizerKind.SGD, learning_rate=1e8),
    )
    with np.errstate(all="ignore"):
        with pytest.raises(TrainingFailure) as info:
            train(regular_dataset, config)
    assert info.value.epoch is not None


def test_parameter_count():
    model = random_model(hidden=(4, 2, 4), m_in=6, m_out=7)
    assert model.parameter_count() == 6 * 4 + (4 * 2 + 2) + (2 * 4 + 4) + 4 * 7


def test_model_dict_round_trip(rng):
    model = random_model(seed=13, hidden=(3, 2, 3), lam=1.0)
    restored = FaeModel.from_dict(model.to_dict())
    sample = random_irregular(rng, n=1)[0]
    np.testing.assert_array_equal(forward(restored, sample).reconstruction, forward(model, sample).reconstruction)
    assert restored.config.lam == 1.0


# ==================== Config ====================

def test_even_stack_needs_bottleneck_index():
    with pytest.raises(ValidationError):
        FaeConfig(hidden_sizes=[4, 4])
    assert FaeConfig(hidden_sizes=[4, 2], representation_index=1).representation_size == 2


def test_penalty_with_tiny_output_basis_rejected():
    with pytest.raises(ValidationError):
        FaeConfig(output_basis=bspline(2, order=2), lam=1.0)


def test_lambda_alias():
    assert FaeConfig.model_validate({"lambda": 3.0}).lam == 3.0
