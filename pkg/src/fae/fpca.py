"""
Functional Principal Component Analysis

Pre-smooths each curve onto a basis, then eigendecomposes the
coefficient covariance in the L² metric of that basis:

    A = G^{1/2} S G^{1/2},  A u = λ u,  ψ = G^{-1/2} u

so the eigenfunctions ψ_k(t) = Σ_m ψ_mk φ_m(t) are L²-orthonormal.
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Sequence, Union

import numpy as np

from .basis import BasisSystem, basis_values, expand, gram_matrix
from .data import FunctionalDataset, FunctionalSample
from .errors import ArgumentError, SingularityError
from .linalg import jacobi_eigh, symmetric_sqrt
from .schemas import FpcaConfig, dump_model_config

logger = logging.getLogger(__name__)

Samples = Union[FunctionalDataset, Sequence[FunctionalSample]]


def smooth_to_basis(samples: Samples, basis: BasisSystem, ridge: float = 0.0) -> np.ndarray:
    """Least-squares basis coefficients per sample -> (N, M).

    Minimizes Σ_j (X(t_j) - Σ_m c_m φ_m(t_j))² + ridge·‖c‖² by SVD least
    squares on the augmented system [Φ; √ridge·I]. Samples sharing a grid
    are solved together.
    """
    if ridge < 0:
        raise ArgumentError("ridge must be nonnegative")
    samples = list(samples)
    if not samples:
        raise ArgumentError("no samples to smooth")

    groups: "OrderedDict[bytes, list]" = OrderedDict()
    for i, sample in enumerate(samples):
        groups.setdefault(sample.times.tobytes(), []).append(i)

    m = basis.num_basis
    coeffs = np.empty((len(samples), m))
    for members in groups.values():
        times = samples[members[0]].times
        phi = basis_values(basis, times)
        rhs = np.stack([samples[i].values for i in members], axis=1)
        if ridge > 0:
            phi = np.vstack([phi, np.sqrt(ridge) * np.eye(m)])
            rhs = np.vstack([rhs, np.zeros((m, rhs.shape[1]))])
        solution, _, rank, _ = np.linalg.lstsq(phi, rhs, rcond=None)
        if rank < m:
            raise SingularityError(
                f"design on {times.size} time points has rank {rank} < {m} basis functions; set ridge > 0"
            )
        coeffs[members] = solution.T
    return coeffs


@dataclass
class FpcaModel:
    basis: BasisSystem
    mean_coeffs: np.ndarray
    eigen_coeffs: np.ndarray  # (M, K), columns are eigenfunctions
    eigenvalues: np.ndarray
    gram: np.ndarray
    ridge: float = 0.0
    gram_resolution: int = 10001

    @property
    def num_components(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def config(self) -> FpcaConfig:
        return FpcaConfig(
            basis=self.basis, num_components=self.num_components,
            ridge=self.ridge, gram_resolution=self.gram_resolution,
        )

    def explained_variance_ratio(self) -> np.ndarray:
        total = self.eigenvalues.sum()
        return self.eigenvalues / total if total > 0 else np.zeros_like(self.eigenvalues)

    def eigenfunctions(self, times) -> np.ndarray:
        """ψ_k(t) -> (len(times), K)."""
        return basis_values(self.basis, times) @ self.eigen_coeffs

    def mean_curve(self, times) -> np.ndarray:
        return expand(self.basis, self.mean_coeffs, times)

    def to_dict(self) -> Dict:
        return {
            "config": dump_model_config(self.config),
            "basis": self.basis.model_dump(mode="json"),
            "ridge": self.ridge,
            "mean_coeffs": self.mean_coeffs.tolist(),
            "eigen_coeffs": {"shape": list(self.eigen_coeffs.shape), "data": self.eigen_coeffs.ravel().tolist()},
            "eigenvalues": self.eigenvalues.tolist(),
            "gram": {"shape": list(self.gram.shape), "data": self.gram.ravel().tolist()},
        }

    @classmethod
    def from_dict(cls, payload: Dict) -> "FpcaModel":
        eig = payload["eigen_coeffs"]
        gram = payload["gram"]
        return cls(
            basis=BasisSystem.model_validate(payload["basis"]),
            mean_coeffs=np.asarray(payload["mean_coeffs"], dtype=np.float64),
            eigen_coeffs=np.asarray(eig["data"], dtype=np.float64).reshape(eig["shape"]),
            eigenvalues=np.asarray(payload["eigenvalues"], dtype=np.float64),
            gram=np.asarray(gram["data"], dtype=np.float64).reshape(gram["shape"]),
            ridge=float(payload.get("ridge", 0.0)),
            gram_resolution=int(payload.get("config", {}).get("gram_resolution", 10001)),
        )


def fit(
    coeff_matrix: np.ndarray,
    basis: BasisSystem,
    num_components: int,
    gram_resolution: int = 10001,
    ridge: float = 0.0,
) -> FpcaModel:
    coeffs = np.asarray(coeff_matrix, dtype=np.float64)
    if coeffs.ndim != 2 or coeffs.shape[1] != basis.num_basis:
        raise ArgumentError(f"coefficient matrix must be (N, {basis.num_basis}), got {coeffs.shape}")
    n, m = coeffs.shape
    if n < 2:
        raise ArgumentError("FPCA needs at least two samples")
    if not 1 <= num_components <= m:
        raise ArgumentError(f"num_components must be in [1, {m}], got {num_components}")

    mean = coeffs.mean(axis=0)
    centered = coeffs - mean
    covariance = centered.T @ centered / (n - 1)

    gram = gram_matrix(basis, gram_resolution)
    g_half, g_inv_half = symmetric_sqrt(gram)
    metric_cov = g_half @ covariance @ g_half
    eigenvalues, vectors = jacobi_eigh((metric_cov + metric_cov.T) / 2.0)

    eigenvalues = np.maximum(eigenvalues[:num_components], 0.0)
    eigen_coeffs = g_inv_half @ vectors[:, :num_components]
    total = max(float(np.trace(metric_cov)), np.finfo(float).tiny)
    logger.info(
        f"FPCA fit on {n} samples ({basis.describe()}): {num_components} component(s) explain "
        f"{100.0 * eigenvalues.sum() / total:.2f}% of variance"
    )
    return FpcaModel(basis, mean, eigen_coeffs, eigenvalues, gram, ridge, gram_resolution)


def train(dataset: Samples, config: FpcaConfig) -> FpcaModel:
    """smooth_to_basis + fit with the settings of an FpcaConfig."""
    coeffs = smooth_to_basis(dataset, config.basis, config.ridge)
    return fit(coeffs, config.basis, config.num_components, config.gram_resolution, config.ridge)


def scores(model: FpcaModel, sample: FunctionalSample) -> np.ndarray:
    """ξ_k = (c - μ)ᵀ G ψ_k."""
    return scores_dataset(model, [sample])[0]


def scores_dataset(model: FpcaModel, samples: Samples) -> np.ndarray:
    coeffs = smooth_to_basis(samples, model.basis, model.ridge)
    return (coeffs - model.mean_coeffs) @ model.gram @ model.eigen_coeffs


def _component_coeffs(model: FpcaModel, score_matrix: np.ndarray) -> np.ndarray:
    k = score_matrix.shape[-1]
    if k > model.num_components:
        raise ArgumentError(f"{k} scores given but the model has {model.num_components} components")
    return model.mean_coeffs + score_matrix @ model.eigen_coeffs[:, :k].T


def reconstruct(model: FpcaModel, score_vector, eval_times) -> np.ndarray:
    """μ(t) + Σ_k ξ_k ψ_k(t); fewer than K scores use the leading components."""
    score_vector = np.atleast_1d(np.asarray(score_vector, dtype=np.float64))
    return expand(model.basis, _component_coeffs(model, score_vector), eval_times)


def reconstruct_dataset(model: FpcaModel, score_matrix: np.ndarray, dataset: FunctionalDataset) -> np.ndarray:
    """Reconstruction of every sample at its own observed times, as one long array."""
    coeffs = _component_coeffs(model, np.asarray(score_matrix, dtype=np.float64))
    phi = basis_values(model.basis, dataset.times)
    return np.sum(phi * coeffs[dataset.segment_ids], axis=1)


def smooth_dataset(model: FpcaModel, dataset: FunctionalDataset, eval_times) -> np.ndarray:
    """Truncated-expansion curves for every sample on a shared grid -> (N, len(eval_times))."""
    coeffs = _component_coeffs(model, scores_dataset(model, dataset))
    return expand(model.basis, coeffs, eval_times)
