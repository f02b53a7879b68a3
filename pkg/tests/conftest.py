"""Shared fixtures."""
import numpy as np
import pytest

from src.fae.basis import basis_values, bspline
from src.fae.data import FunctionalDataset, FunctionalSample
from src.fae.schemas import Activation, FaeConfig, OptimizerConfig


def make_dataset(coeffs, times, labels=None, basis=None):
    """Curves Σ_m B_im φ_m(t) on one shared grid."""
    basis = basis or bspline(coeffs.shape[1])
    values = coeffs @ basis_values(basis, times).T
    samples = [
        FunctionalSample(times, values[i], None if labels is None else int(labels[i]), f"s{i:03d}")
        for i in range(coeffs.shape[0])
    ]
    return FunctionalDataset(samples)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid21():
    return np.linspace(0.0, 1.0, 21)


@pytest.fixture
def regular_dataset(rng, grid21):
    coeffs = rng.normal(size=(24, 6))
    return make_dataset(coeffs, grid21, labels=np.arange(24) % 3)


@pytest.fixture
def irregular_dataset(rng, grid21):
    samples = []
    for i in range(12):
        interior = np.sort(rng.choice(np.arange(1, 20), size=12, replace=False))
        keep = np.concatenate([[0], interior, [20]])
        times = grid21[keep]
        samples.append(FunctionalSample(times, np.sin(2 * np.pi * times) + 0.1 * i, i % 2, f"irr{i}"))
    return FunctionalDataset(samples)


@pytest.fixture
def small_fae_config():
    return FaeConfig(
        input_basis=bspline(6),
        output_basis=bspline(6),
        hidden_sizes=[3],
        activation=Activation.SIGMOID,
        epochs=5,
        batch_size=8,
        optimizer=OptimizerConfig(learning_rate=0.01),
        seed=3,
    )


@pytest.fixture
def curves_factory():
    return make_dataset
