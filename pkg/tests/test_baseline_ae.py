import numpy as np
import pytest

from src.fae.baseline_ae import (
    AeModel,
    MaskedBatch,
    MaskedVector,
    ae_encode,
    ae_reconstruct,
    ae_smooth,
    ae_train,
    align,
    align_dataset,
    masked_loss,
    reconstruct_dataset,
)
from src.fae.data import FunctionalDataset, FunctionalSample
from src.fae.errors import ArgumentError, UnsupportedOperationError
from src.fae.nncore import GradientTape
from src.fae.schemas import Activation, AeConfig, OptimizerConfig


def ae_model(grid, hidden=(4,), activation=Activation.SIGMOID, seed=0):
    config = AeConfig(hidden_sizes=list(hidden), activation=activation, init_sigma=0.3)
    return AeModel.initialize(config, grid, np.random.default_rng(seed))


# ==================== Alignment ====================

def test_align_zero_fills_unobserved(grid21):
    sample = FunctionalSample(grid21[[0, 4, 20]], [1.0, 2.0, 3.0])
    vec = align(sample, grid21)
    assert vec.mask.sum() == 3
    assert vec.values[4] == 2.0
    np.testing.assert_array_equal(vec.values[~vec.mask], 0.0)


def test_align_rejects_off_grid(grid21):
    with pytest.raises(ArgumentError):
        align(FunctionalSample([0.0, 0.33, 1.0], [1.0, 2.0, 3.0]), grid21)


def test_align_dataset_defaults_to_union_grid(irregular_dataset):
    batch = align_dataset(irregular_dataset)
    assert batch.values.shape[0] == 12
    assert batch.mask.sum() == irregular_dataset.num_observations
    assert np.all(batch.mask[:, 0]) and np.all(batch.mask[:, -1])


def test_masked_vector_requires_zero_fill():
    with pytest.raises(ArgumentError):
        MaskedVector([1.0, 2.0], [True, False])
    with pytest.raises(ArgumentError):
        MaskedVector([1.0, 0.0], [True])


def test_stack_rejects_mixed_widths():
    with pytest.raises(ArgumentError):
        MaskedBatch.stack([MaskedVector([1.0, 0.0], [True, False]), MaskedVector([1.0], [True])])


# ==================== Forward and loss ====================

def test_zero_model_outputs_zero(grid21, regular_dataset):
    model = ae_model(grid21)
    for p in model.parameters():
        p[...] = 0.0
    np.testing.assert_array_equal(ae_reconstruct(model, align_dataset(regular_dataset)), 0.0)


def test_masked_positions_do_not_leak(grid21, irregular_dataset):
    model = ae_model(grid21, seed=2)
    clean = align_dataset(irregular_dataset, grid21)
    noisy = MaskedBatch(np.where(clean.mask, clean.values, 1e6), clean.mask.copy())
    np.testing.assert_array_equal(ae_reconstruct(model, noisy), ae_reconstruct(model, clean))
    np.testing.assert_array_equal(ae_encode(model, noisy), ae_encode(model, clean))

    grads = []
    for batch in (clean, noisy):
        tape = GradientTape(model.parameters())
        loss = masked_loss(model, batch, tape)
        grads.append((loss, tape.backward()))
    assert grads[0][0] == grads[1][0]
    for a, b in zip(grads[0][1], grads[1][1]):
        np.testing.assert_array_equal(a, b)


def test_fully_masked_batch_has_zero_loss_and_gradient(grid21):
    model = ae_model(grid21, seed=1)
    batch = MaskedBatch(np.zeros((3, 21)), np.zeros((3, 21), dtype=bool))
    tape = GradientTape(model.parameters())
    assert masked_loss(model, batch, tape) == 0.0
    for g in tape.backward():
        np.testing.assert_array_equal(g, 0.0)


def test_masked_loss_divides_by_batch_size(grid21):
    model = ae_model(grid21)
    for p in model.parameters():
        p[...] = 0.0
    values = np.zeros((2, 21))
    mask = np.zeros((2, 21), dtype=bool)
    values[0, 3], mask[0, 3] = 2.0, True
    values[1, 5], mask[1, 5] = 1.0, True
    assert masked_loss(model, MaskedBatch(values, mask)) == pytest.approx(2.5)


def test_grid_length_mismatch(grid21):
    model = ae_model(grid21)
    with pytest.raises(ArgumentError):
        ae_reconstruct(model, MaskedVector(np.ones(20), np.ones(20, dtype=bool)))


def test_single_vector_shapes(grid21, regular_dataset):
    model = ae_model(grid21, hidden=(5, 2, 5))
    vec = align(regular_dataset[0], grid21)
    assert ae_encode(model, vec).shape == (2,)
    assert ae_reconstruct(model, vec).shape == (21,)
    assert ae_encode(model, align_dataset(regular_dataset)).shape == (24, 2)


def test_reconstruct_dataset_follows_observed_times(grid21, irregular_dataset):
    model = ae_model(grid21, seed=5)
    full = ae_reconstruct(model, align_dataset(irregular_dataset, grid21))
    long = reconstruct_dataset(model, irregular_dataset)
    parts = irregular_dataset.split_long(long)
    for i, sample in enumerate(irregular_dataset):
        positions = np.searchsorted(grid21, sample.times)
        np.testing.assert_array_equal(parts[i], full[i, positions])


def test_smooth_only_on_training_grid(grid21, regular_dataset):
    model = ae_model(grid21)
    on_grid = ae_smooth(model, regular_dataset, grid21[[2, 7]])
    np.testing.assert_array_equal(on_grid, ae_reconstruct(model, align_dataset(regular_dataset))[:, [2, 7]])
    with pytest.raises(UnsupportedOperationError):
        ae_smooth(model, regular_dataset, [0.123])


# ==================== Training ====================

def test_repeated_vector_is_learned():
    grid = np.linspace(0.0, 1.0, 11)
    target = np.sin(2 * np.pi * grid) + 0.5
    dataset = FunctionalDataset([FunctionalSample(grid, target) for _ in range(8)])
    config = AeConfig(
        hidden_sizes=[3], activation=Activation.IDENTITY, epochs=1500, batch_size=None,
        init_sigma=0.3, optimizer=OptimizerConfig(learning_rate=0.01),
    )
    result = ae_train(dataset, config)
    recon = ae_reconstruct(result.model, align_dataset(dataset))
    assert np.mean((recon - target) ** 2) < 1e-3 * np.mean(target ** 2)


def test_training_is_deterministic(irregular_dataset):
    config = AeConfig(hidden_sizes=[3], epochs=5, batch_size=4, seed=7)
    first = ae_train(irregular_dataset, config)
    second = ae_train(irregular_dataset, config)
    assert first.history == second.history
    for a, b in zip(first.model.parameters(), second.model.parameters()):
        np.testing.assert_array_equal(a, b)


def test_masked_batch_training_needs_grid(regular_dataset):
    with pytest.raises(ArgumentError):
        ae_train(align_dataset(regular_dataset), AeConfig(epochs=1))


def test_training_callback_receives_model(regular_dataset):
    seen = []
    ae_train(regular_dataset, AeConfig(epochs=3), on_epoch_end=lambda e, loss, m: seen.append((e, m)))
    assert [e for e, _ in seen] == [1, 2, 3]
    assert isinstance(seen[-1][1], AeModel)


def test_parameter_count(grid21):
    model = ae_model(grid21, hidden=(4, 2, 4))
    assert model.parameter_count() == (21 * 4 + 4) + (4 * 2 + 2) + (2 * 4 + 4) + (4 * 21 + 21)


def test_model_dict_round_trip(grid21, regular_dataset):
    model = ae_model(grid21, hidden=(3, 2, 3), seed=4)
    restored = AeModel.from_dict(model.to_dict())
    batch = align_dataset(regular_dataset)
    np.testing.assert_array_equal(ae_reconstruct(restored, batch), ae_reconstruct(model, batch))
    np.testing.assert_array_equal(restored.grid, grid21)
