"""
Synthetic Functional Data

Samples d-dimensional Gaussian-mixture representations, maps them to
basis coefficients with a frozen random network (linear, or one Sigmoid
hidden layer), renders curves on a grid, then optionally adds i.i.d.
Gaussian noise and drops interior time points per curve. The mixture
component is the class label.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .basis import basis_values, bspline
from .data import FunctionalDataset, FunctionalSample
from .errors import ArgumentError, ConfigError
from .nncore import DenseLayer, Network
from .schemas import Activation, MapKind, ScenarioConfig

logger = logging.getLogger(__name__)


# ==================== Presets ====================

PRESET_NOISE_RATIO = 0.05

SCENARIO_PRESETS: Dict[str, Dict] = {
    # Linear map, 21 regular points
    "S1_1": {
        "n_samples": 6000,
        "grid_size": 21,
        "gen_basis": 8,
        "map_kind": MapKind.LINEAR,
        "map_sigma": 1.0,
        "irregular_removals": 0,
    },
    # One Sigmoid hidden layer of 20 neurons, 51 regular points
    "S1_2": {
        "n_samples": 3000,
        "grid_size": 51,
        "gen_basis": 10,
        "map_kind": MapKind.ONE_HIDDEN_SIGMOID,
        "map_sigma": 3.0,
        "irregular_removals": 0,
    },
    # Same data as S1_2, used for the FAE vs classic AE comparison
    "S2_1": {
        "n_samples": 3000,
        "grid_size": 51,
        "gen_basis": 10,
        "map_kind": MapKind.ONE_HIDDEN_SIGMOID,
        "map_sigma": 3.0,
        "irregular_removals": 0,
    },
    # S1_2 with 25 interior points removed per curve (26 remain)
    "S2_2": {
        "n_samples": 3000,
        "grid_size": 51,
        "gen_basis": 10,
        "map_kind": MapKind.ONE_HIDDEN_SIGMOID,
        "map_sigma": 3.0,
        "irregular_removals": 25,
    },
}


def preset(name: str, **overrides) -> ScenarioConfig:
    """Named scenario sizes; mixture and noise settings are the documented defaults."""
    key = str(name).upper().replace(".", "_")
    if key not in SCENARIO_PRESETS:
        raise ArgumentError(f"unknown scenario preset {name!r}; choose from {sorted(SCENARIO_PRESETS)}")
    entry = SCENARIO_PRESETS[key]
    grid_size = entry["grid_size"]
    fields = {
        "name": key,
        "n_samples": entry["n_samples"],
        "latent_dim": 5,
        "n_components": 3,
        "map_kind": entry["map_kind"],
        "map_width": 20,
        "map_sigma": entry["map_sigma"],
        "gen_basis": bspline(entry["gen_basis"]),
        "grid": np.linspace(0.0, 1.0, grid_size).tolist(),
        "noise_ratio": PRESET_NOISE_RATIO,
        "irregular_removals": entry["irregular_removals"],
    }
    fields.update(overrides)
    return ScenarioConfig(**fields)


# ==================== Generation ====================

@dataclass
class SimulatedData:
    dataset: FunctionalDataset
    latents: np.ndarray
    coeffs: np.ndarray
    labels: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    map_network: Network
    noise_sd: float
    config: ScenarioConfig

    def sidecar(self) -> Dict:
        """Everything needed to replay the dataset."""
        return {
            "scenario": self.config.model_dump(mode="json"),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "noise_sd": self.noise_sd,
            "map_network": self.map_network.to_dict(),
        }


def lattice_means(rng: np.random.Generator, n_components: int, latent_dim: int, separation: float) -> np.ndarray:
    """Distinct points ±(separation/√2)·e_k, centred; pairwise distances >= separation."""
    if n_components > 2 * latent_dim:
        raise ConfigError(f"lattice holds at most {2 * latent_dim} means, asked for {n_components}")
    scale = separation / np.sqrt(2.0)
    points = np.concatenate([np.eye(latent_dim), -np.eye(latent_dim)]) * scale
    chosen = points[rng.choice(points.shape[0], size=n_components, replace=False)]
    return chosen - chosen.mean(axis=0)


def _check_covariance(cov: np.ndarray, component: int) -> None:
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ConfigError(f"covariance of component {component} is not symmetric")
    eigenvalues = np.linalg.eigvalsh(cov)
    if eigenvalues.min(initial=0.0) < -1e-10 * max(1.0, np.abs(eigenvalues).max(initial=0.0)):
        raise ConfigError(f"covariance of component {component} is not positive semidefinite")


def build_map_network(config: ScenarioConfig) -> Network:
    """Frozen latent -> coefficient map, seeded by the scenario's map seed."""
    rng = np.random.default_rng(config.effective_map_seed)
    d = config.latent_dim
    m = config.gen_basis.num_basis
    sigma = config.map_sigma
    if config.map_kind == MapKind.LINEAR:
        return Network([DenseLayer(rng.normal(0.0, sigma / np.sqrt(d), (m, d)), None, Activation.IDENTITY, "map")])
    width = config.map_width
    hidden = DenseLayer(
        rng.normal(0.0, sigma / np.sqrt(d), (width, d)),
        rng.normal(0.0, sigma / np.sqrt(d), width),
        Activation.SIGMOID,
        "map_hidden",
    )
    output = DenseLayer(rng.normal(0.0, 1.0 / np.sqrt(width), (m, width)), None, Activation.IDENTITY, "map_output")
    return Network([hidden, output])


def _remove_interior(rng: np.random.Generator, grid_size: int, removals: int) -> np.ndarray:
    dropped = rng.choice(np.arange(1, grid_size - 1), size=removals, replace=False)
    keep = np.ones(grid_size, dtype=bool)
    keep[dropped] = False
    return np.flatnonzero(keep)


def generate(config: ScenarioConfig) -> SimulatedData:
    rng = np.random.default_rng(config.seed)
    n, d, k = config.n_samples, config.latent_dim, config.n_components

    weights = np.full(k, 1.0 / k) if config.weights is None else np.asarray(config.weights)
    labels = rng.choice(k, size=n, p=weights)

    means = (
        lattice_means(rng, k, d, config.separation)
        if config.means is None else np.asarray(config.means, dtype=np.float64)
    )
    if config.covariances is None:
        covariances = np.stack([config.covariance_scale * np.eye(d)] * k)
    else:
        covariances = np.asarray(config.covariances, dtype=np.float64)
    for c in range(k):
        _check_covariance(covariances[c], c)

    latents = np.empty((n, d))
    for c in range(k):
        members = np.flatnonzero(labels == c)
        if members.size:
            latents[members] = rng.multivariate_normal(means[c], covariances[c], size=members.size, method="eigh")

    network = build_map_network(config)
    coeffs = network.forward(latents)[-1]

    grid = np.asarray(config.grid, dtype=np.float64)
    values = coeffs @ basis_values(config.gen_basis, grid).T

    noise_sd = config.noise_sd if config.noise_ratio is None else config.noise_ratio * float(values.std())
    if noise_sd > 0:
        values = values + rng.normal(0.0, noise_sd, size=values.shape)

    samples: List[FunctionalSample] = []
    for i in range(n):
        keep = slice(None) if config.irregular_removals == 0 else _remove_interior(rng, grid.size, config.irregular_removals)
        samples.append(FunctionalSample(grid[keep], values[i, keep], int(labels[i]), f"s{i:05d}"))

    logger.info(
        f"Generated {n} curves ({config.name or 'custom'}): J={grid.size - config.irregular_removals}, "
        f"d={d}, components={k}, map={config.map_kind.value}, noise_sd={noise_sd:.4g}"
    )
    return SimulatedData(
        dataset=FunctionalDataset(samples),
        latents=latents,
        coeffs=coeffs,
        labels=labels,
        means=means,
        covariances=covariances,
        map_network=network,
        noise_sd=noise_sd,
        config=config,
    )
